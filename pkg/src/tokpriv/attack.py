"""Reconstruction attacks.

``oracle_attack`` knows the full tuple mapping and searches the candidate
originals of an observed sequence left to right with a language model,
dropping the least likely prefixes after every step once the retained ones
carry at least ``pi`` of the beam's probability mass. Because a sequence is
never more probable than its prefix, the candidates that survive are the
likely ones.

``nn_attack`` inverts embedding-based substitutions by listing the nearest
vocabulary neighbors of each privatized token.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from tokpriv._util import parallel_map
from tokpriv.lm import Scorer
from tokpriv.mapping import TupleMapping
from tokpriv.metrics import hits_at_k, mrr, precision_at_k, token_edit_distance
from tokpriv.vocab import EmbeddingTable, Metric, nearest

REPORT_SCHEMA_VERSION = 1

Prefix = tuple[str, ...]


@dataclass(frozen=True)
class BeamCandidate:
    prefix: Prefix
    log_prob: float
    beam_prob: float


@dataclass(frozen=True)
class AttackConfig:
    """Oracle attacker settings.

    Attributes:
        pi: Probability mass the retained prefixes must reach after each step, in (0, 1].
        max_beam: Optional hard cap on the beam size, applied after the mass cut.
    """

    pi: float = 0.85
    max_beam: int | None = None

    def __post_init__(self):
        if not 0 < self.pi <= 1:
            raise ValueError(f"pi must be in (0, 1], got {self.pi}")
        if self.max_beam is not None and self.max_beam < 1:
            raise ValueError(f"max_beam must be positive, got {self.max_beam}")


class Beam:
    """Live prefixes with their log-probabilities.

    Beam probabilities are the log-probabilities normalized over the live
    prefixes (a softmax), so they always sum to one.
    """

    __slots__ = ("prefixes", "log_probs")

    def __init__(self, prefixes: Sequence[Prefix], log_probs: Iterable[float]):
        self.prefixes = list(prefixes)
        if not isinstance(log_probs, np.ndarray):
            log_probs = list(log_probs)
        self.log_probs = np.array(log_probs, dtype=np.float64)
        if len(self.prefixes) != len(self.log_probs):
            raise ValueError("one log-probability per prefix required")
        if not self.prefixes:
            raise ValueError("a beam cannot be empty")

    @classmethod
    def initial(cls) -> Beam:
        return cls([()], [0.0])

    def __len__(self) -> int:
        return len(self.prefixes)

    @property
    def beam_probs(self) -> np.ndarray:
        lp = self.log_probs
        top = lp.max()
        if top == -math.inf:
            return np.full(len(lp), 1.0 / len(lp))
        w = np.exp(lp - top)
        return w / w.sum()

    def candidates(self) -> list[BeamCandidate]:
        bp = self.beam_probs
        return [
            BeamCandidate(p, float(lp), float(b)) for p, lp, b in zip(self.prefixes, self.log_probs, bp)
        ]

    def ranked_indices(self) -> list[int]:
        """Indices best first: higher log-probability, then lexicographically smaller prefix."""
        lp = self.log_probs
        prefixes = self.prefixes
        return sorted(range(len(prefixes)), key=lambda i: (-lp[i], prefixes[i]))


def expand(beam: Beam, mapping: TupleMapping, observed: str, scorer: Scorer) -> Beam:
    """Extend every prefix by each token that could have produced ``observed``.

    Leftover and out-of-vocabulary tokens stand for themselves, so the beam
    keeps its size; a representative multiplies it by the tuple size.
    """
    members = mapping.members_for(observed)
    options = (observed,) if members is None else members
    n = scorer.context_length
    step_cache: dict[Prefix, tuple[float, ...]] = {}
    prefixes: list[Prefix] = []
    log_probs: list[float] = []
    for prefix, lp in zip(beam.prefixes, beam.log_probs.tolist()):
        key = prefix if n is None else prefix[max(0, len(prefix) - n) :]
        cond = step_cache.get(key)
        if cond is None:
            cond = tuple(scorer.cond_log_prob(prefix, t) for t in options)
            step_cache[key] = cond
        for tok, c in zip(options, cond):
            prefixes.append(prefix + (tok,))
            log_probs.append(lp + c)
    return Beam(prefixes, log_probs)


def prune(beam: Beam, pi: float, max_beam: int | None = None) -> Beam:
    """Keep the smallest best-first set of prefixes whose beam mass reaches ``pi``.

    ``pi = 1`` keeps everything (subject to ``max_beam``).
    """
    if pi >= 1.0 and (max_beam is None or len(beam) <= max_beam):
        return beam
    order = beam.ranked_indices()
    if pi < 1.0:
        probs = beam.beam_probs[order]
        cum = np.cumsum(probs)
        reached = np.flatnonzero(cum >= pi - 1e-12)
        keep = int(reached[0]) + 1 if len(reached) else len(order)
        order = order[:keep]
    if max_beam is not None:
        order = order[:max_beam]
    return Beam([beam.prefixes[i] for i in order], beam.log_probs[order])


@dataclass(frozen=True)
class StepTrace:
    """What happened at one position: the scored expansion and the prefixes kept."""

    position: int
    observed: str
    expanded: list[BeamCandidate]
    kept: list[Prefix]

    @property
    def dropped(self) -> list[Prefix]:
        kept = set(self.kept)
        return [c.prefix for c in self.expanded if c.prefix not in kept]


def oracle_attack(
    observed: Sequence[str],
    mapping: TupleMapping,
    scorer: Scorer,
    config: AttackConfig = AttackConfig(),
    trace: list[StepTrace] | None = None,
) -> list[tuple[Prefix, float]]:
    """Rank candidate originals of ``observed``, most likely first.

    Returns every candidate that survives pruning with its full-sequence
    log-probability. Pass a list as ``trace`` to record each step.
    """
    if len(observed) == 0:
        return []
    beam = Beam.initial()
    for pos, tok in enumerate(observed):
        beam = expand(beam, mapping, tok, scorer)
        expanded = beam.candidates() if trace is not None else None
        beam = prune(beam, config.pi, config.max_beam)
        if trace is not None:
            trace.append(StepTrace(pos, tok, expanded, list(beam.prefixes)))
    return [(beam.prefixes[i], float(beam.log_probs[i])) for i in beam.ranked_indices()]


def nn_attack(
    privatized: Sequence[str],
    table: EmbeddingTable,
    k: int = 5,
    metric: Metric | str = Metric.COSINE,
    exclude_self: bool = True,
) -> list[list[str]]:
    """For each position, the ``k`` tokens nearest to the privatized token's embedding.

    By default the privatized token itself is skipped, which suits mechanisms
    that never return the original. With ``exclude_self=False`` the token is a
    candidate too (it is then always ranked first), which is the right
    attacker for mechanisms that often leave tokens unchanged.
    """
    ids = table.vocabulary.encode(privatized)
    out = []
    for i in ids.tolist():
        exclude = (i,) if exclude_self else ()
        hits = nearest(table, table.vectors[i], metric, exclude=exclude, k=k)
        out.append([table.vocabulary.token(j) for j, _ in hits])
    return out


# --- reports ----------------------------------------------------------------


@dataclass
class SequenceRecord:
    """Attack outcome for one sequence.

    ``rank`` is the 1-based rank of the true sequence (``None`` if it was not
    among the candidates). For the nearest-neighbor attack ``token_ranks``
    holds the per-token ranks instead and ``rank`` is unused.
    """

    index: int
    top_prediction: Prefix
    edit_distance: int
    length: int
    rank: int | None = None
    n_candidates: int | None = None
    token_ranks: list[int | None] | None = None

    def to_json(self) -> dict:
        obj = {
            "index": self.index,
            "length": self.length,
            "top_prediction": " ".join(self.top_prediction),
            "edit_distance": self.edit_distance,
        }
        if self.token_ranks is None:
            obj["rank"] = self.rank
            obj["n_candidates"] = self.n_candidates
        else:
            obj["token_ranks"] = self.token_ranks
        return obj


@dataclass
class AttackReport:
    attack: str
    k: int
    records: list[SequenceRecord] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def _ranks(self) -> list[int | None]:
        if self.attack == "nn":
            return [r for rec in self.records for r in rec.token_ranks]
        return [rec.rank for rec in self.records]

    def mrr(self) -> float:
        return mrr(self._ranks())

    def precision_at_k(self, k: int | None = None) -> float:
        return precision_at_k(hits_at_k(self._ranks(), self.k if k is None else k))

    def mean_edit_distance(self, normalize: bool = False) -> float:
        if not self.records:
            raise ValueError("empty report")
        if normalize:
            vals = [r.edit_distance / r.length if r.length else 0.0 for r in self.records]
        else:
            vals = [float(r.edit_distance) for r in self.records]
        return sum(vals) / len(vals)

    def aggregates(self, normalize: bool = False) -> dict:
        return {
            "n_sequences": len(self.records),
            "n_scored": len(self._ranks()),
            "mrr": self.mrr(),
            f"precision_at_{self.k}": self.precision_at_k(),
            "precision_at_1": self.precision_at_k(1),
            "mean_edit_distance": self.mean_edit_distance(normalize),
            "edit_distance_normalized": normalize,
        }

    def to_json(self, normalize: bool = False) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "attack": self.attack,
            "k": self.k,
            "params": self.params,
            "aggregate": self.aggregates(normalize),
            "records": [r.to_json() for r in self.records],
        }


def evaluate_oracle(
    pairs: Sequence[tuple[Sequence[str], Sequence[str]]],
    mapping: TupleMapping,
    scorer: Scorer,
    config: AttackConfig = AttackConfig(),
    k: int = 5,
    workers: int = 1,
) -> AttackReport:
    """Run the oracle attack on ``(truth, observed)`` pairs and score it."""

    def one(item):
        idx, (truth, observed) = item
        truth = tuple(truth)
        ranking = oracle_attack(observed, mapping, scorer, config)
        rank = next((r for r, (cand, _) in enumerate(ranking, start=1) if cand == truth), None)
        top = ranking[0][0] if ranking else ()
        return SequenceRecord(
            index=idx,
            top_prediction=top,
            edit_distance=token_edit_distance(top, truth),
            length=len(truth),
            rank=rank,
            n_candidates=len(ranking),
        )

    records = parallel_map(one, list(enumerate(pairs)), workers)
    return AttackReport("oracle", k, records, {"pi": config.pi, "max_beam": config.max_beam})


def evaluate_nn(
    pairs: Sequence[tuple[Sequence[str], Sequence[str]]],
    table: EmbeddingTable,
    k: int = 5,
    metric: Metric | str = Metric.COSINE,
    exclude_self: bool = True,
    workers: int = 1,
) -> AttackReport:
    """Run the nearest-neighbor attack on ``(truth, privatized)`` pairs; hits are per token."""
    metric = Metric(metric)

    def one(item):
        idx, (truth, priv) = item
        truth = tuple(truth)
        if len(truth) != len(priv):
            raise ValueError(f"record {idx}: original and privatized lengths differ")
        lists = nn_attack(priv, table, k, metric, exclude_self)
        ranks = [cands.index(t) + 1 if t in cands else None for t, cands in zip(truth, lists)]
        top = tuple(c[0] for c in lists)
        return SequenceRecord(
            index=idx,
            top_prediction=top,
            edit_distance=token_edit_distance(top, truth),
            length=len(truth),
            token_ranks=ranks,
        )

    records = parallel_map(one, list(enumerate(pairs)), workers)
    return AttackReport(
        "nn", k, records, {"metric": metric.value, "exclude_self": exclude_self}
    )
