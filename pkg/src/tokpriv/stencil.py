"""Contextual token replacement with a gaussian stencil over neighboring embeddings.

Each token is replaced by the vocabulary entry closest to a weighted
average of the embeddings in its window (the "quasi-embedding"), never by
itself. The punctuated variant gives the center token zero weight, so the
replacement is computed from the neighbors alone.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from tokpriv._util import parallel_map
from tokpriv.vocab import EmbeddingTable, Metric, nearest


@dataclass(frozen=True)
class StencilConfig:
    """Stencil parameters.

    Attributes:
        window: Total tokens considered per position (odd); ``window // 2`` on each side.
        sigma: Standard deviation of the gaussian, in token-index units.
        punctuated: Zero the center weight.
        metric: Distance used for the nearest-token projection.
    """

    window: int = 9
    sigma: float = 0.8
    punctuated: bool = False
    metric: Metric = Metric.EUCLIDEAN

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        _check(self.window, self.sigma, self.punctuated)


def _check(window: int, sigma: float, punctuated: bool) -> None:
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be an odd positive count, got {window}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if punctuated and window < 3:
        raise ValueError("a punctuated stencil needs window >= 3")


def _normalized_gaussian(offsets: np.ndarray, sigma: float) -> np.ndarray:
    # shift exponents by the smallest squared offset so tiny sigma cannot underflow to all zeros
    sq = offsets.astype(np.float64) ** 2
    w = np.exp(-(sq - sq.min()) / (2.0 * sigma * sigma))
    return w / w.sum()


def gaussian_weights(window: int, sigma: float, punctuated: bool = False) -> np.ndarray:
    """Normalized gaussian weights for offsets ``-window//2 .. window//2``."""
    _check(window, sigma, punctuated)
    half = window // 2
    offsets = np.arange(-half, half + 1)
    if not punctuated:
        return _normalized_gaussian(offsets, sigma)
    w = np.zeros(window)
    keep = offsets != 0
    w[keep] = _normalized_gaussian(offsets[keep], sigma)
    return w


def position_weights(
    length: int, k: int, window: int, sigma: float, punctuated: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and renormalized weights used at position ``k`` of a ``length``-token sequence.

    Window slots falling outside the sequence are dropped and the remaining
    weights rescaled to sum to one. A punctuated stencil on a one-token
    sequence has no neighbors, so it falls back to the center token alone.
    """
    half = window // 2
    offsets = np.arange(max(-half, -k), min(half, length - 1 - k) + 1)
    if punctuated and len(offsets) > 1:
        offsets = offsets[offsets != 0]
    return offsets, _normalized_gaussian(offsets, sigma)


def quasi_embeddings(ids: np.ndarray, table: EmbeddingTable, config: StencilConfig) -> np.ndarray:
    m = len(ids)
    out = np.empty((m, table.dim))
    rows = table.vectors[ids]
    for k in range(m):
        offsets, w = position_weights(m, k, config.window, config.sigma, config.punctuated)
        out[k] = w @ rows[k + offsets]
    return out


def privatize_stencil(
    seq: Sequence[str],
    table: EmbeddingTable,
    config: StencilConfig = StencilConfig(),
    workers: int = 1,
) -> tuple[str, ...]:
    """Replace every token by the nearest *other* token to its quasi-embedding.

    Raises:
        OutOfVocabularyError: a token has no embedding (position reported).
    """
    if len(seq) == 0:
        return ()
    if len(table) < 2:
        raise ValueError("need at least two vocabulary entries to replace a token")
    ids = table.vocabulary.encode(seq)
    quasi = quasi_embeddings(ids, table, config)

    def project(k: int) -> int:
        return nearest(table, quasi[k], config.metric, exclude=(int(ids[k]),), k=1)[0][0]

    out = parallel_map(project, range(len(ids)), workers)
    return table.vocabulary.decode(out)
