"""Many-to-one tuple mappings over a vocabulary.

The vocabulary is partitioned into pairs or triplets and every member of a
tuple is rewritten to the tuple's representative. Tokens that do not fit
into a full tuple (``V mod s`` of them) map to themselves.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from typing import TextIO

import numpy as np

from tokpriv._util import open_text
from tokpriv.corpus import FrequencyTable
from tokpriv.errors import FormatError
from tokpriv.vocab import Vocabulary


class RepresentativePolicy(str, enum.Enum):
    RANDOM = "random"
    HIGH_FREQUENCY = "high_frequency"
    LOW_FREQUENCY = "low_frequency"


class TupleMapping:
    """A partition of the vocabulary into equal-size tuples, each with a representative.

    Args:
        vocabulary: The vocabulary being partitioned.
        tuples: Disjoint id tuples, all of size 2 or all of size 3.
        representatives: For each tuple, the id every member is rewritten to.
        leftovers: Ids outside every tuple; they map to themselves.
    """

    def __init__(
        self,
        vocabulary: Vocabulary,
        tuples: Iterable[Sequence[int]],
        representatives: Iterable[int],
        leftovers: Iterable[int] = (),
    ):
        self.vocabulary = vocabulary
        self.tuples = tuple(tuple(int(i) for i in t) for t in tuples)
        self.representatives = tuple(int(r) for r in representatives)
        self.leftovers = frozenset(int(i) for i in leftovers)
        self._validate()

        V = len(vocabulary)
        image = np.arange(V, dtype=np.int64)
        self._tuple_index = np.full(V, -1, dtype=np.int64)
        for ti, (members, rep) in enumerate(zip(self.tuples, self.representatives)):
            image[list(members)] = rep
            self._tuple_index[list(members)] = ti
        image.setflags(write=False)
        self._image = image
        self._rep_to_tuple = {rep: ti for ti, rep in enumerate(self.representatives)}
        self._token_image = {
            vocabulary.token(i): vocabulary.token(int(image[i])) for i in range(V)
        }

    def _validate(self) -> None:
        V = len(self.vocabulary)
        if not self.tuples:
            raise ValueError("mapping needs at least one tuple")
        sizes = {len(t) for t in self.tuples}
        if len(sizes) != 1 or next(iter(sizes)) not in (2, 3):
            raise ValueError(f"tuples must all have size 2 or all size 3, got sizes {sorted(sizes)}")
        if len(self.representatives) != len(self.tuples):
            raise ValueError("need exactly one representative per tuple")
        seen: set[int] = set()
        for members, rep in zip(self.tuples, self.representatives):
            for i in members:
                if not 0 <= i < V:
                    raise ValueError(f"id {i} outside vocabulary of size {V}")
                if i in seen:
                    raise ValueError(f"token {self.vocabulary.token(i)!r} appears in two tuples")
                seen.add(i)
            if rep not in members:
                raise ValueError(
                    f"representative {self.vocabulary.token(rep) if 0 <= rep < V else rep!r} "
                    "is not a member of its tuple"
                )
        overlap = seen & self.leftovers
        if overlap:
            tok = self.vocabulary.token(min(overlap))
            raise ValueError(f"token {tok!r} is both a tuple member and a leftover")
        if len(seen) + len(self.leftovers) != V:
            raise ValueError("tuples and leftovers do not cover the vocabulary")
        if len(self.leftovers) != V % self.size:
            raise ValueError(
                f"expected {V % self.size} leftover(s) for V={V}, s={self.size}, "
                f"got {len(self.leftovers)}"
            )

    @property
    def size(self) -> int:
        return len(self.tuples[0])

    def image_id(self, idx: int) -> int:
        return int(self._image[idx])

    def is_representative(self, token: str) -> bool:
        i = self.vocabulary.get(token)
        return i is not None and i in self._rep_to_tuple

    def is_fixed(self, token: str) -> bool:
        """True when ``apply`` leaves the token unchanged (representative, leftover or OOV)."""
        return self._token_image.get(token, token) == token

    def members_for(self, observed: str) -> tuple[str, ...] | None:
        """Tuple members that could have produced ``observed``.

        Returns ``None`` for leftovers and out-of-vocabulary tokens, which
        stand only for themselves. Raises ``ValueError`` when ``observed`` is
        a non-representative tuple member, which no correct mapping output
        can contain.
        """
        i = self.vocabulary.get(observed)
        if i is None or i in self.leftovers:
            return None
        ti = self._rep_to_tuple.get(i)
        if ti is None:
            raise ValueError(f"observed token {observed!r} is a tuple member but not a representative")
        return self.vocabulary.decode(self.tuples[ti])

    def apply(self, seq: Sequence[str]) -> tuple[str, ...]:
        img = self._token_image
        return tuple(img.get(t, t) for t in seq)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TupleMapping):
            return NotImplemented
        return (
            self.vocabulary == other.vocabulary
            and self.tuples == other.tuples
            and self.representatives == other.representatives
            and self.leftovers == other.leftovers
        )

    def __hash__(self) -> int:
        return hash((self.tuples, self.representatives, self.leftovers))

    def __repr__(self) -> str:
        return (
            f"TupleMapping(V={len(self.vocabulary)}, s={self.size}, "
            f"tuples={len(self.tuples)}, leftovers={len(self.leftovers)})"
        )


def gen_random(vocab: Vocabulary, s: int, seed: int) -> TupleMapping:
    """Uniformly random partition and representatives, reproducible from ``seed``."""
    if s not in (2, 3):
        raise ValueError(f"tuple size must be 2 or 3, got {s}")
    V = len(vocab)
    if V < s:
        raise ValueError(f"vocabulary of size {V} is smaller than the tuple size {s}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(V)
    n_tuples = V // s
    grouped = perm[: n_tuples * s].reshape(n_tuples, s)
    picks = rng.integers(0, s, size=n_tuples)
    reps = grouped[np.arange(n_tuples), picks]
    return TupleMapping(vocab, grouped.tolist(), reps.tolist(), perm[n_tuples * s :].tolist())


def frequency_ranking(freq: FrequencyTable, vocab: Vocabulary) -> list[int]:
    """Vocabulary ids by descending corpus count.

    Ties, and tokens that never occur, are ordered by surface text; unseen
    tokens all come after the counted ones.
    """
    return sorted(range(len(vocab)), key=lambda i: (-freq[vocab.token(i)], vocab.token(i)))


def gen_frequency(
    freq: FrequencyTable,
    vocab: Vocabulary,
    policy: RepresentativePolicy | str = RepresentativePolicy.HIGH_FREQUENCY,
) -> TupleMapping:
    """Pair the k-th most frequent token with the k-th token of the bottom half.

    For ``V`` tokens ranked ``1..V`` the pairs are ``(k, k + ceil(V/2))`` for
    ``k = 1..floor(V/2)``. With even ``V`` this is the plain ``k + V/2`` rule;
    with odd ``V`` the median-ranked token is left unpaired.
    """
    policy = RepresentativePolicy(policy)
    if policy is RepresentativePolicy.RANDOM:
        raise ValueError("use gen_random for random representatives")
    V = len(vocab)
    if V == 0:
        raise ValueError("empty vocabulary")
    if V < 2:
        raise ValueError("need at least two tokens to form a pair")
    ranked = frequency_ranking(freq, vocab)
    half, offset = V // 2, (V + 1) // 2
    pairs = [(ranked[k], ranked[k + offset]) for k in range(half)]
    if policy is RepresentativePolicy.HIGH_FREQUENCY:
        reps = [hi for hi, _ in pairs]
    else:
        reps = [lo for _, lo in pairs]
    leftovers = [ranked[half]] if V % 2 else []
    return TupleMapping(vocab, pairs, reps, leftovers)


def unchanged_fraction(mapping: TupleMapping, corpus_freq: FrequencyTable) -> float:
    """Share of corpus token occurrences that ``apply`` leaves unchanged."""
    total = corpus_freq.total
    if total == 0:
        raise ValueError("frequency table is empty")
    kept = sum(c for tok, c in corpus_freq.counts.items() if mapping.is_fixed(tok))
    return kept / total


# --- file format --------------------------------------------------------------


def serialize(mapping: TupleMapping, dest: TextIO | None = None) -> bytes:
    """Write the TSV mapping format and return it as UTF-8 bytes.

    One tuple per line, ``representative<TAB>member<TAB>member[<TAB>member]``,
    where the member list includes the representative; leftovers sit alone
    on a line.
    """
    vocab = mapping.vocabulary
    lines = [f"# tuple mapping: V={len(vocab)} s={mapping.size}"]
    for members, rep in zip(mapping.tuples, mapping.representatives):
        lines.append("\t".join([vocab.token(rep), *vocab.decode(members)]))
    for i in sorted(mapping.leftovers):
        lines.append(vocab.token(i))
    text = "\n".join(lines) + "\n"
    if dest is not None:
        dest.write(text)
    return text.encode("utf-8")


def deserialize(source, vocab: Vocabulary | None = None) -> TupleMapping:
    """Parse the TSV mapping format and check every mapping invariant.

    Without ``vocab`` the vocabulary is taken from the file itself, in order
    of first appearance.
    """
    fh, name, owned = open_text(source)
    rows: list[tuple[int, str, list[str]]] = []
    loners: list[tuple[int, str]] = []
    try:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if any(not c for c in cols):
                raise FormatError("empty column", lineno, name)
            if len(cols) == 1:
                loners.append((lineno, cols[0]))
            elif len(cols) in (3, 4):
                rows.append((lineno, cols[0], cols[1:]))
            else:
                raise FormatError(
                    f"expected 'rep<TAB>member<TAB>member[<TAB>member]' or a lone token, got {len(cols)} columns",
                    lineno,
                    name,
                )
    finally:
        if owned:
            fh.close()

    if vocab is None:
        order: dict[str, None] = {}
        for _, _, members in rows:
            order.update(dict.fromkeys(members))
        for _, tok in loners:
            order[tok] = None
        vocab = Vocabulary(order)

    where: dict[str, int] = {}

    def lookup(tok: str, lineno: int) -> int:
        i = vocab.get(tok)
        if i is None:
            raise FormatError(f"unknown token {tok!r}", lineno, name)
        if tok in where:
            raise FormatError(f"token {tok!r} already used on line {where[tok]}", lineno, name)
        where[tok] = lineno
        return i

    tuples, reps = [], []
    for lineno, rep, members in rows:
        if len(members) != len(rows[0][2]):
            raise FormatError("all tuples must have the same size", lineno, name)
        if rep not in members:
            raise FormatError(f"representative {rep!r} is not among the tuple members", lineno, name)
        ids = [lookup(m, lineno) for m in members]
        tuples.append(ids)
        reps.append(vocab.id(rep))
    leftovers = [lookup(tok, lineno) for lineno, tok in loners]
    try:
        return TupleMapping(vocab, tuples, reps, leftovers)
    except ValueError as exc:
        raise FormatError(str(exc), source=name) from None
