"""Vocabulary, embedding table and exact nearest-neighbor search."""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from tokpriv._util import open_text
from tokpriv.errors import FormatError, OutOfVocabularyError


class Vocabulary:
    """Ordered set of distinct tokens with dense ids ``0..V-1``."""

    __slots__ = ("_tokens", "_index")

    def __init__(self, tokens: Iterable[str]):
        self._tokens = tuple(tokens)
        self._index = {}
        for i, tok in enumerate(self._tokens):
            if not tok:
                raise ValueError("tokens must be non-empty")
            if tok in self._index:
                raise ValueError(f"duplicate token {tok!r}")
            self._index[tok] = i

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: object) -> bool:
        return token in self._index

    def __iter__(self):
        return iter(self._tokens)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self._tokens == other._tokens

    def __hash__(self) -> int:
        return hash(self._tokens)

    def __repr__(self) -> str:
        return f"Vocabulary(V={len(self)})"

    def id(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise OutOfVocabularyError(token) from None

    def get(self, token: str, default: int | None = None) -> int | None:
        return self._index.get(token, default)

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        """Map tokens to ids, raising with the offending position on OOV."""
        ids = np.empty(len(tokens), dtype=np.int64)
        for pos, tok in enumerate(tokens):
            i = self._index.get(tok)
            if i is None:
                raise OutOfVocabularyError(tok, pos)
            ids[pos] = i
        return ids

    def decode(self, ids: Iterable[int]) -> tuple[str, ...]:
        return tuple(self._tokens[i] for i in ids)


class Metric(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """A ``V x d`` matrix of token embeddings with precomputed row norms."""

    vocabulary: Vocabulary
    vectors: np.ndarray
    row_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vec = np.array(self.vectors, dtype=np.float64, copy=True)
        if vec.ndim != 2 or vec.shape[0] != len(self.vocabulary) or vec.shape[1] < 1:
            raise ValueError(
                f"expected a ({len(self.vocabulary)}, d) matrix, got shape {vec.shape}"
            )
        if not np.all(np.isfinite(vec)):
            raise ValueError("embedding values must be finite")
        norms = np.sqrt(np.einsum("ij,ij->i", vec, vec))
        if np.any(norms == 0):
            bad = int(np.flatnonzero(norms == 0)[0])
            raise ValueError(f"zero embedding vector for {self.vocabulary.token(bad)!r}")
        vec.setflags(write=False)
        norms.setflags(write=False)
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "row_norms", norms)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.vocabulary)

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[self.vocabulary.id(token)]

    def rows(self, tokens: Sequence[str]) -> np.ndarray:
        return self.vectors[self.vocabulary.encode(tokens)]


def load_embeddings(source: str | bytes | TextIO) -> EmbeddingTable:
    """Read the text embedding format: a ``V d`` header, then ``token v1 .. vd`` rows."""
    fh, name, owned = open_text(source)
    try:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise FormatError("header must be 'V d'", 1, name)
        try:
            n_rows, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError("header must be two integers 'V d'", 1, name) from None
        if n_rows < 1 or dim < 1:
            raise FormatError("V and d must be positive", 1, name)
        tokens: list[str] = []
        seen: dict[str, int] = {}
        vectors = np.empty((n_rows, dim), dtype=np.float64)
        lineno = 1
        for line in fh:
            lineno += 1
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split(" ")
            tok, values = fields[0], fields[1:]
            if len(tokens) == n_rows:
                raise FormatError(f"more than {n_rows} rows", lineno, name)
            if not tok:
                raise FormatError("empty token", lineno, name)
            if tok in seen:
                raise FormatError(f"duplicate token {tok!r} (first on line {seen[tok]})", lineno, name)
            if len(values) != dim:
                raise FormatError(f"expected {dim} values, got {len(values)}", lineno, name)
            try:
                row = np.array([float(v) for v in values])
            except ValueError:
                raise FormatError("non-numeric value", lineno, name) from None
            if not np.all(np.isfinite(row)):
                raise FormatError("non-finite value", lineno, name)
            if not np.any(row):
                raise FormatError(f"zero vector for {tok!r}", lineno, name)
            seen[tok] = lineno
            vectors[len(tokens)] = row
            tokens.append(tok)
        if len(tokens) != n_rows:
            raise FormatError(f"header declares {n_rows} rows, found {len(tokens)}", lineno, name)
    finally:
        if owned:
            fh.close()
    return EmbeddingTable(Vocabulary(tokens), vectors)


def save_embeddings(table: EmbeddingTable, dest: TextIO) -> None:
    dest.write(f"{len(table)} {table.dim}\n")
    for tok, row in zip(table.vocabulary, table.vectors):
        dest.write(tok + " " + " ".join(repr(float(v)) for v in row) + "\n")


def scores(table: EmbeddingTable, query: np.ndarray, metric: Metric) -> np.ndarray:
    """Score every row against ``query``: distance (euclidean) or similarity (cosine)."""
    if metric is Metric.EUCLIDEAN:
        diff = table.vectors - query
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    qnorm = np.sqrt(query @ query)
    if qnorm == 0:
        raise ValueError("cosine similarity is undefined for a zero query")
    return (table.vectors @ query) / (table.row_norms * qnorm)


def nearest(
    table: EmbeddingTable,
    query: np.ndarray,
    metric: Metric | str = Metric.EUCLIDEAN,
    exclude: Iterable[int] = (),
    k: int = 1,
) -> list[tuple[int, float]]:
    """Exact k nearest rows to ``query``, best first.

    Euclidean results are ordered by ascending distance, cosine by descending
    similarity; equal scores fall back to ascending token id. Excluded ids
    never appear.
    """
    metric = Metric(metric)
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (table.dim,):
        raise ValueError(f"query has shape {query.shape}, table dimension is {table.dim}")
    if not np.all(np.isfinite(query)):
        raise ValueError("query must be finite")
    excluded = np.fromiter(set(exclude), dtype=np.int64)
    available = len(table) - len(excluded)
    if k < 1 or k > available:
        raise ValueError(f"k={k} out of range; {available} candidates available")

    s = scores(table, query, metric)
    # sort key: smaller is better
    key = s.copy() if metric is Metric.EUCLIDEAN else -s
    if len(excluded):
        key[excluded] = np.inf
    if k < len(key):
        kth = np.partition(key, k - 1)[k - 1]
        cand = np.flatnonzero(key <= kth)
    else:
        cand = np.arange(len(key))
    order = cand[np.lexsort((cand, key[cand]))][:k]
    return [(int(i), float(s[i])) for i in order]
