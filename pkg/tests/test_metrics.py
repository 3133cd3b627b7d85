import functools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tokpriv.metrics import hits_at_k, mrr, precision_at_k, token_edit_distance


def test_mrr_examples():
    assert mrr([1, 1, 1]) == 1.0
    assert mrr([2]) == 0.5
    assert mrr([1, None, 4]) == pytest.approx((1 + 0 + 0.25) / 3, abs=1e-15)
    assert round(mrr([1, None, 4]), 5) == 0.41667


def test_precision_examples():
    assert precision_at_k([True] * 4) == 1.0
    assert precision_at_k([False] * 3) == 0.0
    assert precision_at_k([True, False, False, True]) == 0.5


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        mrr([])
    with pytest.raises(ValueError):
        precision_at_k([])


def test_invalid_rank():
    with pytest.raises(ValueError):
        mrr([0])


def test_hits_at_k():
    assert hits_at_k([1, 5, 6, None], 5) == [True, True, False, False]


def test_edit_distance_examples():
    assert token_edit_distance(["a", "b"], ["a", "b"]) == 0
    assert token_edit_distance(["a"], []) == 1
    assert token_edit_distance([], []) == 0
    assert token_edit_distance("what a nice day".split(), "what what nice unicorn".split()) == 2
    assert token_edit_distance("a b c".split(), "b c d".split()) == 2


def recursive_distance(a, b):
    @functools.lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (a[i] != b[j]))

    return go(0, 0)


def test_edit_distance_property_suite():
    rng = random.Random(0)
    alphabet = list("abcd")

    def rand_seq():
        return tuple(rng.choice(alphabet) for _ in range(rng.randint(0, 9)))

    for _ in range(1000):
        a, b, c = rand_seq(), rand_seq(), rand_seq()
        dab = token_edit_distance(a, b)
        assert dab == recursive_distance(a, b)
        assert dab == token_edit_distance(b, a)
        assert (dab == 0) == (a == b)
        assert token_edit_distance(a, c) <= dab + token_edit_distance(b, c)
        assert abs(len(a) - len(b)) <= dab <= max(len(a), len(b))


@given(st.lists(st.one_of(st.none(), st.integers(1, 50)), min_size=1, max_size=40))
def test_rank_aggregates_consistent(ranks):
    m = mrr(ranks)
    p1 = precision_at_k(hits_at_k(ranks, 1))
    p5 = precision_at_k(hits_at_k(ranks, 5))
    assert 0 <= p1 <= m <= 1
    assert p1 <= p5 <= 1
    # recompute from raw ranks
    assert m == pytest.approx(sum(1 / r for r in ranks if r) / len(ranks))
    # a rank beyond 1 contributes at most 1/2
    assert m <= p1 + (1 - p1) / 2 + 1e-12
