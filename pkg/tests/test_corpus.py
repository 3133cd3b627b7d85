import io
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tokpriv.corpus import (
    FrequencyTable,
    Record,
    TokenizerConfig,
    build_frequency,
    read_corpus,
    read_dataset,
    read_frequency,
    rank_descending,
    tokenize,
    write_dataset,
    write_frequency,
)
from tokpriv.errors import FormatError

PUNCT = TokenizerConfig(split_punctuation=True)


def test_tokenize_whitespace():
    assert tokenize("what a nice day") == ("what", "a", "nice", "day")


def test_tokenize_empty():
    assert tokenize("") == ()
    assert tokenize("   \t ") == ()


def test_tokenize_split_punctuation():
    assert tokenize("No apparent joy.", PUNCT) == ("No", "apparent", "joy", ".")


def test_tokenize_lowercase():
    assert tokenize("No Apparent", TokenizerConfig(lowercase=True)) == ("no", "apparent")


def test_pretokenized_ignores_other_flags():
    cfg = TokenizerConfig(lowercase=True, split_punctuation=True, pretokenized_input=True)
    assert tokenize("No joy.", cfg) == ("No", "joy.")


@given(
    st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=60),
    st.booleans(),
    st.booleans(),
    st.booleans(),
)
def test_tokenize_idempotent(text, lower, punct, pre):
    cfg = TokenizerConfig(lower, punct, pre)
    toks = tokenize(text, cfg)
    assert tokenize(" ".join(toks), cfg) == toks
    assert all(t and not any(c.isspace() for c in t) for t in toks)


def test_build_frequency_examples():
    freq = build_frequency([("a", "a", "b")])
    assert dict(freq.counts) == {"a": 2, "b": 1}
    assert freq.total == 3
    empty = build_frequency([])
    assert len(empty) == 0 and empty.total == 0


docs_strategy = st.lists(st.lists(st.sampled_from("abcdefg"), max_size=8).map(tuple), max_size=10)


@given(docs_strategy, docs_strategy)
def test_frequency_additive(c1, c2):
    assert build_frequency(c1 + c2) == build_frequency(c1) + build_frequency(c2)


@given(docs_strategy, st.integers(1, 6))
def test_frequency_independent_of_workers(docs, workers):
    assert build_frequency(docs, workers=workers) == build_frequency(docs)


def test_rank_descending_examples():
    assert rank_descending(FrequencyTable({"a": 2, "b": 1})) == ["a", "b"]
    assert rank_descending(FrequencyTable({"b": 1, "a": 1})) == ["a", "b"]


def test_rank_descending_empty():
    with pytest.raises(ValueError):
        rank_descending(FrequencyTable({}))


@given(st.dictionaries(st.text(min_size=1, max_size=3), st.integers(1, 5), min_size=1))
def test_rank_is_sorted_permutation(counts):
    freq = FrequencyTable(counts)
    ranked = rank_descending(freq)
    assert sorted(ranked) == sorted(counts)
    cs = [counts[t] for t in ranked]
    assert all(a >= b for a, b in zip(cs, cs[1:]))


def test_rank_matches_zipf_generator():
    # exact Zipf(1) counts over 1000 types; names sort in generation order so ties agree too
    n_types = 1000
    names = [f"w{r:04d}" for r in range(1, n_types + 1)]
    stream = [name for r, name in enumerate(names, start=1) for _ in range(round(100_000 / r))]
    random.Random(3).shuffle(stream)
    docs = [tuple(stream[i : i + 40]) for i in range(0, len(stream), 40)]
    assert rank_descending(build_frequency(docs)) == names


def test_frequency_table_rejects_zero_counts():
    with pytest.raises(ValueError):
        FrequencyTable({"a": 0})


def test_frequency_file_round_trip():
    freq = FrequencyTable({"the": 5, "a": 5, "zebra": 1})
    buf = io.StringIO()
    write_frequency(freq, buf)
    assert buf.getvalue() == "a\t5\nthe\t5\nzebra\t1\n"
    assert read_frequency(buf.getvalue().encode()) == freq


@pytest.mark.parametrize(
    "text, line",
    [("a\t1\nb\n", 2), ("a\t1\na\t2\n", 2), ("a\tx\n", 1), ("a\t0\n", 1)],
)
def test_frequency_file_errors_report_line(text, line):
    with pytest.raises(FormatError) as exc:
        read_frequency(text.encode())
    assert exc.value.lineno == line


def test_dataset_round_trip():
    recs = [Record("1", "what a nice day"), Record("0", "no apparent joy")]
    buf = io.StringIO()
    write_dataset(recs, buf)
    assert read_dataset(buf.getvalue().encode()) == recs


def test_dataset_missing_tab():
    with pytest.raises(FormatError) as exc:
        read_dataset(b"1\tfine\nbroken line\n")
    assert exc.value.lineno == 2


def test_read_corpus_lines(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("No joy.\n\nwhat a day\n", encoding="utf-8")
    assert list(read_corpus(p, PUNCT)) == [("No", "joy", "."), (), ("what", "a", "day")]
