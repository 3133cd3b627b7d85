"""Tokenization, corpus/dataset IO and frequency statistics."""

from __future__ import annotations

import re
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TextIO

from tokpriv._util import open_text
from tokpriv.errors import FormatError

TokenSequence = tuple[str, ...]

_WORD_OR_PUNCT = re.compile(r"\w+|[^\w\s]")


@dataclass(frozen=True)
class TokenizerConfig:
    """How raw text is cut into tokens.

    ``pretokenized_input`` means the text already has one token per whitespace
    gap; the other flags are then ignored so external tokenizations pass
    through untouched.
    """

    lowercase: bool = False
    split_punctuation: bool = False
    pretokenized_input: bool = False


def tokenize(text: str, config: TokenizerConfig = TokenizerConfig()) -> TokenSequence:
    if config.pretokenized_input:
        return tuple(text.split())
    if config.lowercase:
        text = text.lower()
    if config.split_punctuation:
        return tuple(_WORD_OR_PUNCT.findall(text))
    return tuple(text.split())


def detokenize(tokens: Iterable[str]) -> str:
    return " ".join(tokens)


@dataclass(frozen=True)
class FrequencyTable:
    """Occurrence counts of tokens in a corpus."""

    counts: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for tok, c in self.counts.items():
            if c < 1:
                raise ValueError(f"count for {tok!r} must be >= 1, got {c}")

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __len__(self) -> int:
        return len(self.counts)

    def __contains__(self, token: object) -> bool:
        return token in self.counts

    def __getitem__(self, token: str) -> int:
        return self.counts.get(token, 0)

    def __add__(self, other: FrequencyTable) -> FrequencyTable:
        merged = Counter(self.counts)
        merged.update(other.counts)
        return FrequencyTable(dict(merged))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FrequencyTable):
            return NotImplemented
        return dict(self.counts) == dict(other.counts)

    def __hash__(self) -> int:
        return hash(frozenset(self.counts.items()))


def _count(documents: Iterable[Sequence[str]]) -> Counter:
    counter: Counter = Counter()
    for doc in documents:
        counter.update(doc)
    return counter


def build_frequency(documents: Iterable[Sequence[str]], workers: int = 1) -> FrequencyTable:
    """Count token occurrences over all documents.

    With ``workers > 1`` the documents are split into contiguous shards that
    are counted separately and merged; counting is commutative so the result
    does not depend on the sharding.
    """
    if workers <= 1:
        return FrequencyTable(dict(_count(documents)))
    docs = list(documents)
    step = max(1, -(-len(docs) // workers))
    shards = [docs[i : i + step] for i in range(0, len(docs), step)]
    total: Counter = Counter()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_count, shards):
            total.update(part)
    return FrequencyTable(dict(total))


def rank_descending(freq: FrequencyTable) -> list[str]:
    """Tokens by descending count, ties broken by ascending surface text."""
    if len(freq) == 0:
        raise ValueError("cannot rank an empty frequency table")
    return sorted(freq.counts, key=lambda t: (-freq.counts[t], t))


# --- file formats -----------------------------------------------------------


def read_corpus(source, config: TokenizerConfig = TokenizerConfig()) -> Iterator[TokenSequence]:
    """Yield one token sequence per line of a plain-text corpus."""
    fh, _, owned = open_text(source)
    try:
        for line in fh:
            yield tokenize(line.rstrip("\n"), config)
    finally:
        if owned:
            fh.close()


@dataclass(frozen=True)
class Record:
    label: str
    text: str


def read_dataset(source) -> list[Record]:
    """Read a ``label<TAB>text`` dataset, one record per line, no header."""
    fh, name, owned = open_text(source)
    records = []
    try:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if "\t" not in line:
                raise FormatError("expected 'label<TAB>text'", lineno, name)
            label, text = line.split("\t", 1)
            records.append(Record(label, text))
    finally:
        if owned:
            fh.close()
    return records


def write_dataset(records: Iterable[Record], dest: TextIO) -> None:
    for rec in records:
        if "\n" in rec.text or "\t" in rec.label:
            raise ValueError(f"record cannot be written as a single TSV line: {rec!r}")
        dest.write(f"{rec.label}\t{rec.text}\n")


def write_frequency(freq: FrequencyTable, dest: TextIO) -> None:
    """Write ``token<TAB>count`` lines in rank order."""
    for tok in rank_descending(freq) if len(freq) else []:
        dest.write(f"{tok}\t{freq.counts[tok]}\n")


def read_frequency(source) -> FrequencyTable:
    fh, name, owned = open_text(source)
    counts: dict[str, int] = {}
    try:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError("expected 'token<TAB>count'", lineno, name)
            tok, raw = parts
            if tok in counts:
                raise FormatError(f"duplicate token {tok!r}", lineno, name)
            try:
                c = int(raw)
            except ValueError:
                raise FormatError(f"count {raw!r} is not an integer", lineno, name) from None
            if c < 1:
                raise FormatError(f"count must be >= 1, got {c}", lineno, name)
            counts[tok] = c
    finally:
        if owned:
            fh.close()
    return FrequencyTable(counts)
