"""Prefix scorers for the reconstruction attacker.

Anything with ``cond_log_prob(context, token)`` and ``next_log_probs(context)``
can drive the attacker. Two implementations ship: a smoothed n-gram model
trained on local text, and a lookup-table scorer with hand-written
conditionals (handy for fixtures and worked examples).

Sequences are scored as open prefixes: contexts are padded with ``<s>``
markers, and no end-of-sequence event is predicted. Each conditional is
therefore a distribution over the model vocabulary alone.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import Protocol, TextIO, runtime_checkable

from tokpriv._util import open_text
from tokpriv.errors import FormatError

BOS = "<s>"
EOS = "</s>"
FORMAT = "tokpriv-lm"
FORMAT_VERSION = 1
_RESERVED = {BOS, EOS}


@runtime_checkable
class Scorer(Protocol):
    """What the attacker needs from a language model.

    ``context_length`` is how many trailing context tokens the conditionals
    depend on, or ``None`` if they may depend on the whole prefix.
    """

    context_length: int | None

    @property
    def vocabulary(self) -> tuple[str, ...]: ...

    def cond_log_prob(self, context: Sequence[str], token: str) -> float: ...

    def next_log_probs(self, context: Sequence[str]) -> dict[str, float]: ...


def log_prob(scorer: Scorer, seq: Sequence[str]) -> float:
    """Chain-rule log-probability of ``seq`` as a prefix (0 for the empty sequence)."""
    total = 0.0
    for i in range(len(seq)):
        total += scorer.cond_log_prob(seq[:i], seq[i])
    return total


def _safe_log(p: float) -> float:
    if p <= 0.0:
        return -math.inf
    return min(0.0, math.log(p))


@dataclass(frozen=True)
class Smoothing:
    """Smoothing scheme.

    ``add_k`` adds ``k`` to every count at the model's highest order
    (``k=0`` is plain maximum likelihood). ``interp`` mixes the maximum
    likelihood estimates of every order, highest order first, with an
    add-one unigram at the bottom; a context never seen in training hands its
    weight down to the next lower order.
    """

    kind: str = "interp"
    k: float = 0.0
    lambdas: tuple[float, ...] = (0.6, 0.3, 0.1)

    def __post_init__(self):
        if self.kind == "add_k":
            if self.k < 0 or not math.isfinite(self.k):
                raise ValueError(f"add_k needs k >= 0, got {self.k}")
        elif self.kind == "interp":
            lams = tuple(float(x) for x in self.lambdas)
            object.__setattr__(self, "lambdas", lams)
            if not lams or any(not x > 0 for x in lams):
                raise ValueError(f"interpolation weights must be positive, got {lams}")
            if abs(sum(lams) - 1.0) > 1e-9:
                raise ValueError(f"interpolation weights must sum to 1, got {sum(lams)}")
        else:
            raise ValueError(f"unknown smoothing {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> Smoothing:
        """Parse ``add_k:0.1``, ``interp:0.6,0.3,0.1`` or ``mle``."""
        name, _, arg = text.partition(":")
        if name == "mle":
            return cls("add_k", k=0.0)
        if name == "add_k":
            return cls("add_k", k=float(arg or 1.0))
        if name == "interp":
            return cls("interp", lambdas=tuple(float(x) for x in arg.split(",")))
        raise ValueError(f"unknown smoothing {text!r}")

    def to_json(self) -> dict:
        if self.kind == "add_k":
            return {"kind": "add_k", "k": self.k}
        return {"kind": "interp", "lambdas": list(self.lambdas)}

    @classmethod
    def from_json(cls, obj: Mapping) -> Smoothing:
        if obj["kind"] == "add_k":
            return cls("add_k", k=float(obj["k"]))
        return cls("interp", lambdas=tuple(obj["lambdas"]))


class NGramModel:
    """Count-based n-gram model over a fixed vocabulary.

    Built from highest-order counts only; every lower-order table is derived
    from them, which is what makes save/load exact.
    """

    def __init__(
        self,
        order: int,
        smoothing: Smoothing,
        vocabulary: Sequence[str],
        counts: Mapping[tuple[str, ...], int],
    ):
        if not 1 <= order <= 5:
            raise ValueError(f"order must be in [1, 5], got {order}")
        if smoothing.kind == "interp" and len(smoothing.lambdas) != order:
            raise ValueError(
                f"interpolation needs {order} weights for an order-{order} model, "
                f"got {len(smoothing.lambdas)}"
            )
        vocab = tuple(vocabulary)
        if not vocab:
            raise ValueError("empty vocabulary")
        if _RESERVED & set(vocab):
            raise ValueError(f"vocabulary may not contain the markers {sorted(_RESERVED)}")
        self.order = order
        self.smoothing = smoothing
        self._vocab = vocab
        self._vocab_set = frozenset(vocab)
        self.counts = dict(counts)
        self.context_length = order - 1

        # per-order tables: suffix length j-1 context -> Counter(next token)
        self._tables: list[dict[tuple[str, ...], Counter]] = []
        self._totals: list[dict[tuple[str, ...], int]] = []
        for j in range(1, order + 1):
            table: dict[tuple[str, ...], Counter] = defaultdict(Counter)
            for gram, c in self.counts.items():
                table[gram[order - j : -1]][gram[-1]] += c
            self._tables.append(dict(table))
            # continuations outside the vocabulary do not count towards normalization
            self._totals.append(
                {h: sum(c for w, c in ctr.items() if w in self._vocab_set) for h, ctr in table.items()}
            )
        self._n_tokens = self._totals[0].get((), 0)
        self._cache: dict[tuple[tuple[str, ...], str], float] = {}

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return self._vocab

    def _history(self, context: Sequence[str]) -> tuple[str, ...]:
        n = self.order - 1
        if n == 0:
            return ()
        ctx = tuple(context[max(0, len(context) - n) :])
        return (BOS,) * (n - len(ctx)) + ctx

    def _prob(self, hist: tuple[str, ...], token: str) -> float:
        V = len(self._vocab)
        top = self.order - 1
        if self.smoothing.kind == "add_k":
            k = self.smoothing.k
            c_hw = self._tables[top].get(hist, Counter())[token]
            c_h = self._totals[top].get(hist, 0)
            if c_h + k * V == 0:
                return 1.0 / V
            return (c_hw + k) / (c_h + k * V)
        lams = self.smoothing.lambdas
        p, carry = 0.0, 0.0
        for j in range(self.order, 0, -1):
            lam = lams[self.order - j] + carry
            if j == 1:
                p += lam * (self._tables[0].get((), Counter())[token] + 1) / (self._n_tokens + V)
                break
            h = hist[len(hist) - (j - 1) :]
            c_h = self._totals[j - 1].get(h, 0)
            if c_h:
                p += lam * self._tables[j - 1][h][token] / c_h
                carry = 0.0
            else:
                carry = lam
        return p

    def cond_log_prob(self, context: Sequence[str], token: str) -> float:
        """log P(token | context). Out-of-vocabulary tokens score like unseen vocabulary entries."""
        hist = self._history(context)
        key = (hist, token)
        lp = self._cache.get(key)
        if lp is None:
            lp = _safe_log(self._prob(hist, token))
            self._cache[key] = lp
        return lp

    def next_log_probs(self, context: Sequence[str]) -> dict[str, float]:
        return {w: self.cond_log_prob(context, w) for w in self._vocab}

    def log_prob(self, seq: Sequence[str]) -> float:
        return log_prob(self, seq)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NGramModel):
            return NotImplemented
        return (
            self.order == other.order
            and self.smoothing == other.smoothing
            and self._vocab == other._vocab
            and self.counts == other.counts
        )

    def to_json(self) -> dict:
        grams = sorted(self.counts.items())
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "kind": "ngram",
            "order": self.order,
            "smoothing": self.smoothing.to_json(),
            "vocabulary": list(self._vocab),
            "counts": [[list(g), c] for g, c in grams],
        }


def train(
    corpus: Iterable[Sequence[str]],
    order: int = 3,
    smoothing: Smoothing | None = None,
    vocabulary: Sequence[str] | None = None,
) -> NGramModel:
    """Count n-grams over a corpus, padding each sequence with ``order - 1`` begin markers.

    The vocabulary defaults to the sorted set of training tokens.
    """
    if smoothing is None:
        smoothing = Smoothing("interp", lambdas=_default_lambdas(order))
    if not 1 <= order <= 5:
        raise ValueError(f"order must be in [1, 5], got {order}")
    counts: Counter = Counter()
    types: set[str] = set()
    n_seqs = 0
    for seq in corpus:
        n_seqs += 1
        toks = tuple(seq)
        types.update(toks)
        padded = (BOS,) * (order - 1) + toks
        for i in range(order - 1, len(padded)):
            counts[padded[i - order + 1 : i + 1]] += 1
    if n_seqs == 0 or not counts:
        raise ValueError("cannot train on an empty corpus")
    vocab = tuple(vocabulary) if vocabulary is not None else tuple(sorted(types))
    return NGramModel(order, smoothing, vocab, counts)


def _default_lambdas(order: int) -> tuple[float, ...]:
    if order == 3:
        return (0.6, 0.3, 0.1)
    # geometric halving, normalized
    raw = [2.0 ** -(i) for i in range(order)]
    s = sum(raw)
    return tuple(x / s for x in raw)


class TableScorer:
    """Scorer defined by explicit conditionals on whole prefixes.

    ``rules`` maps a context (tuple of tokens) to ``{token: probability}``.
    Leftover mass is spread evenly over the vocabulary tokens the rule does
    not mention; contexts without a rule are uniform. Tokens outside the
    vocabulary get probability zero.
    """

    context_length = None

    def __init__(self, vocabulary: Sequence[str], rules: Mapping[Sequence[str], Mapping[str, float]]):
        self._vocab = tuple(vocabulary)
        if not self._vocab or len(set(self._vocab)) != len(self._vocab):
            raise ValueError("vocabulary must be non-empty and duplicate-free")
        self.rules: dict[tuple[str, ...], dict[str, float]] = {}
        for ctx, probs in rules.items():
            probs = {t: float(p) for t, p in probs.items()}
            unknown = set(probs) - set(self._vocab)
            if unknown:
                raise ValueError(f"rule for {list(ctx)} names unknown tokens {sorted(unknown)}")
            if any(p < 0 for p in probs.values()):
                raise ValueError(f"negative probability in rule for {list(ctx)}")
            mass = sum(probs.values())
            rest = len(self._vocab) - len(probs)
            if mass > 1 + 1e-9 or (rest == 0 and abs(mass - 1) > 1e-9):
                raise ValueError(f"rule for {list(ctx)} does not define a distribution (mass {mass})")
            self.rules[tuple(ctx)] = probs

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return self._vocab

    def _prob(self, context: tuple[str, ...], token: str) -> float:
        if token not in self._vocab:
            return 0.0
        rule = self.rules.get(context)
        if rule is None:
            return 1.0 / len(self._vocab)
        if token in rule:
            return rule[token]
        rest = len(self._vocab) - len(rule)
        return max(0.0, 1.0 - sum(rule.values())) / rest

    def cond_log_prob(self, context: Sequence[str], token: str) -> float:
        return _safe_log(self._prob(tuple(context), token))

    def next_log_probs(self, context: Sequence[str]) -> dict[str, float]:
        return {w: self.cond_log_prob(context, w) for w in self._vocab}

    def log_prob(self, seq: Sequence[str]) -> float:
        return log_prob(self, seq)

    def to_json(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "kind": "table",
            "vocabulary": list(self._vocab),
            "rules": [{"context": list(c), "probs": p} for c, p in self.rules.items()],
        }


def save_scorer(scorer: NGramModel | TableScorer, dest: TextIO) -> None:
    json.dump(scorer.to_json(), dest, ensure_ascii=False, indent=1)
    dest.write("\n")


def load_scorer(source) -> NGramModel | TableScorer:
    fh, name, owned = open_text(source)
    try:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", exc.lineno, name) from None
    finally:
        if owned:
            fh.close()
    if not isinstance(obj, dict) or obj.get("format") != FORMAT:
        raise FormatError(f"not a {FORMAT} file", source=name)
    if obj.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {obj.get('version')!r}", source=name)
    try:
        if obj["kind"] == "ngram":
            counts = {tuple(g): int(c) for g, c in obj["counts"]}
            return NGramModel(
                int(obj["order"]), Smoothing.from_json(obj["smoothing"]), obj["vocabulary"], counts
            )
        if obj["kind"] == "table":
            rules = {tuple(r["context"]): r["probs"] for r in obj["rules"]}
            return TableScorer(obj["vocabulary"], rules)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model: {exc}", source=name) from None
    raise FormatError(f"unknown model kind {obj.get('kind')!r}", source=name)
