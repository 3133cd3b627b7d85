import json
import math

import numpy as np
import pytest

from _helpers import enumerate_ranking, random_table
from tokpriv import fixtures
from tokpriv.attack import (
    AttackConfig,
    Beam,
    evaluate_nn,
    evaluate_oracle,
    expand,
    nn_attack,
    oracle_attack,
    prune,
)
from tokpriv.lm import Smoothing, TableScorer, load_scorer, log_prob, train
from tokpriv.mapping import TupleMapping, deserialize, gen_frequency, gen_random
from tokpriv.corpus import FrequencyTable
from tokpriv.vocab import EmbeddingTable, Vocabulary


@pytest.fixture(scope="module")
def walkthrough():
    mapping = deserialize(fixtures.path("walkthrough_mapping.tsv"))
    scorer = load_scorer(fixtures.path("walkthrough_scorer.json"))
    return mapping, scorer


OBSERVED = ["what", "what", "nice", "unicorn"]


def test_expand_pair_over_two_prefixes(walkthrough):
    mapping, scorer = walkthrough
    beam = Beam([("what",), ("a",)], [math.log(0.8), math.log(0.2)])
    out = expand(beam, mapping, "nice", scorer)
    assert set(out.prefixes) == {("what", "nice"), ("what", "is"), ("a", "nice"), ("a", "is")}
    assert abs(out.beam_probs.sum() - 1) < 1e-9


def test_expand_leftover_keeps_size(walkthrough):
    _, scorer = walkthrough
    m = TupleMapping(Vocabulary(["p", "q", "r"]), [[0, 1]], [0], [2])
    beam = Beam([("p",), ("q",)], [-1.0, -2.0])
    assert len(expand(beam, m, "r", scorer)) == 2
    assert len(expand(beam, m, "oov", scorer)) == 2


def test_expand_triplet_from_single_prefix():
    m = TupleMapping(Vocabulary("abc"), [[0, 1, 2]], [1])
    scorer = TableScorer("abc", {})
    out = expand(Beam.initial(), m, "b", scorer)
    assert sorted(out.prefixes) == [("a",), ("b",), ("c",)]
    np.testing.assert_allclose(out.beam_probs, [1 / 3] * 3)


def test_expand_rejects_non_representative(walkthrough):
    mapping, scorer = walkthrough
    with pytest.raises(ValueError):
        expand(Beam.initial(), mapping, "a", scorer)


def test_prune_examples():
    beam = Beam([("x",), ("y",), ("z",)], np.log([0.8, 0.15, 0.05]))
    kept = prune(beam, 0.85)
    assert kept.prefixes == [("x",), ("y",)]
    np.testing.assert_allclose(kept.beam_probs, [0.8 / 0.95, 0.15 / 0.95])
    assert prune(beam, 1.0) is beam
    assert prune(beam, 1.0, max_beam=1).prefixes == [("x",)]
    assert prune(beam, 0.5).prefixes == [("x",)]


def test_prune_ties_are_lexicographic():
    beam = Beam([("b",), ("a",), ("c",)], [0.0, 0.0, 0.0])
    assert prune(beam, 0.5).prefixes == [("a",), ("b",)]


def test_config_validation():
    for bad in [0.0, -0.1, 1.5]:
        with pytest.raises(ValueError):
            AttackConfig(pi=bad)
    with pytest.raises(ValueError):
        AttackConfig(max_beam=0)


def test_worked_example(walkthrough):
    mapping, scorer = walkthrough
    trace = []
    ranking = oracle_attack(OBSERVED, mapping, scorer, AttackConfig(pi=0.85), trace=trace)
    assert ranking[0][0] == ("what", "a", "nice", "day")
    assert trace[0].kept == [("what",), ("a",)]
    assert sorted(trace[1].dropped) == [("a", "what"), ("what", "what")]
    assert sorted(trace[1].kept) == [("a", "a"), ("what", "a")]
    # chain probability of the winner: 0.8 * 0.999 * 0.9 * 0.9
    assert math.exp(ranking[0][1]) == pytest.approx(0.647352, abs=1e-9)


def test_empty_and_leftover_only_sequences():
    m = TupleMapping(Vocabulary(["a", "b", "c"]), [[0, 1]], [0], [2])
    scorer = train([["a", "c", "c", "b"]], order=2)
    assert oracle_attack([], m, scorer) == []
    ranking = oracle_attack(["c", "c", "zz"], m, scorer)
    assert ranking == [(("c", "c", "zz"), pytest.approx(log_prob(scorer, ["c", "c", "zz"])))]


def random_instance(seed, s, m_len):
    rng = np.random.default_rng(seed)
    V = int(rng.integers(4, 12))
    vocab = Vocabulary([f"w{i}" for i in range(V)])
    mapping = gen_random(vocab, s, seed)
    docs = [[f"w{i}" for i in rng.integers(0, V, size=rng.integers(2, 15))] for _ in range(30)]
    scorer = train(docs, order=int(rng.integers(1, 4)), smoothing=Smoothing.parse("add_k:0.2"))
    truth = [f"w{i}" for i in rng.integers(0, V, size=m_len)]
    return mapping, scorer, mapping.apply(truth)


@pytest.mark.parametrize("seed", range(12))
def test_full_beam_matches_enumeration(seed):
    mapping, scorer, observed = random_instance(seed, 2 + seed % 2, 8)
    got = oracle_attack(observed, mapping, scorer, AttackConfig(pi=1.0))
    want = enumerate_ranking(observed, mapping, scorer)
    assert [c for c, _ in got] == [c for c, _ in want]
    np.testing.assert_allclose([lp for _, lp in got], [lp for _, lp in want], rtol=0, atol=1e-9)


def test_candidate_count_is_s_to_the_covered_positions():
    for s in (2, 3):
        mapping, scorer, observed = random_instance(100 + s, s, 7)
        covered = sum(mapping.members_for(t) is not None for t in observed)
        assert len(oracle_attack(observed, mapping, scorer, AttackConfig(pi=1.0))) == s**covered


def test_representative_choice_does_not_change_candidates():
    counts = {f"w{i}": 100 - 7 * i for i in range(10)}
    freq = FrequencyTable(counts)
    vocab = Vocabulary(sorted(counts))
    hf = gen_frequency(freq, vocab, "high_frequency")
    lf = gen_frequency(freq, vocab, "low_frequency")
    scorer = train([list(counts)[::-1], list(counts)], order=2, smoothing=Smoothing.parse("add_k:1"))
    truth = ["w0", "w7", "w3", "w9", "w1"]
    a = oracle_attack(hf.apply(truth), hf, scorer, AttackConfig(pi=1.0))
    b = oracle_attack(lf.apply(truth), lf, scorer, AttackConfig(pi=1.0))
    assert a == b


@pytest.mark.parametrize("seed", range(6))
def test_pruned_prefixes_have_no_descendants(seed):
    mapping, scorer, observed = random_instance(200 + seed, 2, 9)
    trace = []
    final = oracle_attack(observed, mapping, scorer, AttackConfig(pi=0.8), trace=trace)
    dropped = [p for step in trace for p in step.dropped]
    for cand, _ in final:
        assert not any(cand[: len(p)] == p for p in dropped)
    for step in trace:
        assert abs(sum(c.beam_prob for c in step.expanded) - 1) < 1e-9
        kept_mass = sum(c.beam_prob for c in step.expanded if c.prefix in set(step.kept))
        assert kept_mass >= 0.8 - 1e-12


def test_max_beam_caps_size():
    mapping, scorer, observed = random_instance(7, 3, 8)
    trace = []
    oracle_attack(observed, mapping, scorer, AttackConfig(pi=1.0, max_beam=5), trace=trace)
    assert all(len(step.kept) <= 5 for step in trace)


def toy3():
    vocab = Vocabulary(["p", "q", "r"])
    return EmbeddingTable(vocab, np.array([[1.0, 1.0], [2.0, 1.0], [1.0, 4.0]]))


def test_nn_attack_toy_euclidean():
    table = toy3()
    assert nn_attack(["p"], table, k=2, metric="euclidean") == [["q", "r"]]
    assert nn_attack(["r"], table, k=2, metric="euclidean") == [["p", "q"]]
    assert nn_attack(["r"], table, k=1, metric="euclidean", exclude_self=False) == [["r"]]


def test_nn_attack_k_covers_all_others():
    table = random_table(20, 4, seed=1)
    lists = nn_attack([f"t{i}" for i in range(20)], table, k=19)
    for i, cands in enumerate(lists):
        assert sorted(cands) == sorted(f"t{j}" for j in range(20) if j != i)


def test_nn_attack_cosine_scale_invariant():
    table = random_table(60, 5, seed=3)
    scaled = EmbeddingTable(table.vocabulary, table.vectors * np.linspace(0.5, 7, 60)[:, None])
    seq = [f"t{i}" for i in range(0, 60, 4)]
    assert nn_attack(seq, table, k=5) == nn_attack(seq, scaled, k=5)


def test_oracle_report(walkthrough):
    mapping, scorer = walkthrough
    truth = ("what", "a", "nice", "day")
    rep = evaluate_oracle([(truth, mapping.apply(truth))] * 3, mapping, scorer, AttackConfig(0.85), k=5)
    assert rep.mrr() == 1.0 and rep.precision_at_k() == 1.0
    assert rep.mean_edit_distance() == 0.0
    obj = json.loads(json.dumps(rep.to_json()))
    assert obj["schema_version"] == 1
    assert obj["aggregate"]["mrr"] == 1.0
    assert [r["rank"] for r in obj["records"]] == [1, 1, 1]


def test_oracle_report_miss_and_workers():
    pairs = []
    mapping, scorer, _ = random_instance(300, 2, 6)
    rng = np.random.default_rng(0)
    V = len(mapping.vocabulary)
    for _ in range(10):
        truth = tuple(f"w{i}" for i in rng.integers(0, V, size=6))
        pairs.append((truth, mapping.apply(truth)))
    cfg = AttackConfig(pi=0.5)
    a = evaluate_oracle(pairs, mapping, scorer, cfg, workers=1)
    b = evaluate_oracle(pairs, mapping, scorer, cfg, workers=4)
    assert a.to_json() == b.to_json()
    ranks = [r.rank for r in a.records]
    assert a.mrr() == pytest.approx(sum(1 / r for r in ranks if r) / len(ranks))


def test_nn_report_counts_tokens():
    table = toy3()
    pairs = [(("p", "q"), ("q", "q")), (("r",), ("p",))]
    rep = evaluate_nn(pairs, table, k=1, metric="euclidean")
    # q -> nearest other is p (hit at rank 1); q -> p (miss for truth q); p -> q (miss for r)
    assert [r.token_ranks for r in rep.records] == [[1, None], [None]]
    assert rep.precision_at_k() == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        evaluate_nn([(("p",), ("p", "q"))], table)
