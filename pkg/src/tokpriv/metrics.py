"""Privacy and utility measures for reconstruction attacks."""

from __future__ import annotations

from collections.abc import Iterable, Sequence


def mrr(ranks: Iterable[int | None]) -> float:
    """Mean reciprocal rank; a missing rank (truth not found) contributes 0."""
    ranks = list(ranks)
    if not ranks:
        raise ValueError("mrr of an empty sequence")
    total = 0.0
    for r in ranks:
        if r is None:
            continue
        if r < 1:
            raise ValueError(f"ranks are 1-based, got {r}")
        total += 1.0 / r
    return total / len(ranks)


def precision_at_k(hits: Iterable[bool]) -> float:
    """Fraction of cases whose truth was among the top k (the caller decides k)."""
    hits = list(hits)
    if not hits:
        raise ValueError("precision_at_k of an empty sequence")
    return sum(1 for h in hits if h) / len(hits)


def hits_at_k(ranks: Iterable[int | None], k: int) -> list[bool]:
    return [r is not None and r <= k for r in ranks]


def token_edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Levenshtein distance over whole tokens with unit costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ta in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, tb in enumerate(b, start=1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (ta != tb),
            )
        prev = cur
    return prev[-1]
