"""Context-free baseline: perturb each token embedding, then snap back to the vocabulary.

The perturbation has a Gamma(d, 1/eta) distributed length and a uniformly
random direction, so its expected norm is ``d / eta``; larger ``eta`` means
less noise.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from tokpriv._util import parallel_map
from tokpriv.vocab import EmbeddingTable, Metric, nearest

_U64 = 1 << 64


@dataclass(frozen=True)
class NoiseConfig:
    eta: float = 150.0
    metric: Metric = Metric.EUCLIDEAN
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")


def position_rng(seed: int, sequence_index: int, position: int) -> np.random.Generator:
    """Independent generator for one token, so results do not depend on scheduling."""
    return np.random.default_rng([seed % _U64, sequence_index, position])


def sample_direction(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform point on the unit sphere in ``R^d`` (normalized standard gaussian)."""
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    while True:
        g = rng.standard_normal(d)
        n = np.sqrt(g @ g)
        if n > 0:
            return g / n


def sample_noise(d: int, eta: float, rng: np.random.Generator) -> np.ndarray:
    """Noise vector ``r * u`` with ``r ~ Gamma(shape=d, scale=1/eta)`` and ``u`` uniform on the sphere."""
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    u = sample_direction(d, rng)
    r = rng.gamma(shape=d, scale=1.0 / eta)
    return r * u


def privatize_noise(
    seq: Sequence[str],
    table: EmbeddingTable,
    config: NoiseConfig = NoiseConfig(),
    sequence_index: int = 0,
    workers: int = 1,
) -> tuple[str, ...]:
    """Replace each token by the vocabulary entry nearest to its noised embedding.

    The original token is a valid output. ``sequence_index`` selects the
    random stream, so different records of a dataset get different noise
    under one seed.
    """
    if len(seq) == 0:
        return ()
    ids = table.vocabulary.encode(seq)
    d = table.dim

    def perturb(k: int) -> int:
        rng = position_rng(config.seed, sequence_index, k)
        query = table.vectors[ids[k]] + sample_noise(d, config.eta, rng)
        return nearest(table, query, config.metric, k=1)[0][0]

    out = parallel_map(perturb, range(len(ids)), workers)
    return table.vocabulary.decode(out)
