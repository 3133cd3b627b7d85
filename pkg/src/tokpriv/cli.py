"""Command-line entry point: ``tokpriv <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from tokpriv._util import parallel_map
from tokpriv.attack import AttackConfig, evaluate_nn, evaluate_oracle
from tokpriv.corpus import (
    Record,
    TokenizerConfig,
    build_frequency,
    detokenize,
    rank_descending,
    read_corpus,
    read_dataset,
    read_frequency,
    tokenize,
    write_dataset,
    write_frequency,
)
from tokpriv.errors import FormatError, OutOfVocabularyError
from tokpriv.lm import Smoothing, load_scorer, save_scorer, train
from tokpriv.mapping import (
    RepresentativePolicy,
    deserialize,
    gen_frequency,
    gen_random,
    serialize,
    unchanged_fraction,
)
from tokpriv.noise import NoiseConfig, privatize_noise
from tokpriv.stencil import StencilConfig, privatize_stencil
from tokpriv.vocab import Metric, Vocabulary, load_embeddings

log = logging.getLogger("tokpriv")

TUPLE_KINDS = {"random2", "random3", "highfreq", "lowfreq"}


class UsageError(Exception):
    pass


def _add_tokenizer_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("tokenization")
    g.add_argument("--lowercase", action="store_true", help="lowercase text before splitting")
    g.add_argument("--split-punct", action="store_true", help="split punctuation into separate tokens")
    g.add_argument(
        "--pretokenized",
        action="store_true",
        help="text is already one token per whitespace gap (other tokenization flags ignored)",
    )


def _tok_config(args) -> TokenizerConfig:
    return TokenizerConfig(
        lowercase=args.lowercase,
        split_punctuation=args.split_punct,
        pretokenized_input=args.pretokenized,
    )


def _out(path: str | None):
    if path is None or path == "-":
        return _Stdout()
    return open(path, "w", encoding="utf-8", newline="\n")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()
        return False


def _require(args, *names: str) -> None:
    missing = ["--" + n.replace("_", "-") for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command}: missing required option(s) {', '.join(missing)}")


def _documents(args) -> list[tuple[str, ...]]:
    cfg = _tok_config(args)
    if args.dataset:
        return [tokenize(r.text, cfg) for r in read_dataset(args.dataset)]
    return list(read_corpus(args.corpus, cfg))


def _vocab_for_mapping(args, freq) -> Vocabulary:
    if getattr(args, "embeddings", None):
        return load_embeddings(args.embeddings).vocabulary
    return Vocabulary(rank_descending(freq))


def _make_mapping(kind: str, freq, vocab: Vocabulary, seed: int | None):
    if kind in ("random2", "random3"):
        if seed is None:
            raise UsageError(f"--seed is required for {kind}")
        return gen_random(vocab, 2 if kind == "random2" else 3, seed)
    policy = RepresentativePolicy.HIGH_FREQUENCY if kind == "highfreq" else RepresentativePolicy.LOW_FREQUENCY
    return gen_frequency(freq, vocab, policy)


# --- commands -----------------------------------------------------------------


def cmd_build_freq(args) -> None:
    if bool(args.corpus) == bool(args.dataset):
        raise UsageError("build-freq: give exactly one of --corpus or --dataset")
    freq = build_frequency(_documents(args), workers=args.workers)
    with _out(args.out) as fh:
        write_frequency(freq, fh)
    log.info("wrote %d types, %d tokens", len(freq), freq.total)


def cmd_gen_mapping(args) -> None:
    freq = read_frequency(args.freq)
    vocab = _vocab_for_mapping(args, freq)
    mapping = _make_mapping(args.kind, freq, vocab, args.seed)
    with _out(args.out) as fh:
        serialize(mapping, fh)


def cmd_lm_train(args) -> None:
    if bool(args.corpus) == bool(args.dataset):
        raise UsageError("lm-train: give exactly one of --corpus or --dataset")
    smoothing = Smoothing.parse(args.smoothing) if args.smoothing else None
    model = train(_documents(args), order=args.order, smoothing=smoothing)
    with _out(args.out) as fh:
        save_scorer(model, fh)


def cmd_privatize(args) -> None:
    cfg = _tok_config(args)
    records = read_dataset(args.input)
    docs = [tokenize(r.text, cfg) for r in records]
    kind = args.mapper

    if kind == "tuple" or kind in TUPLE_KINDS:
        if kind == "tuple":
            _require(args, "mapping")
            mapping = deserialize(args.mapping)
        else:
            freq = read_frequency(args.freq) if args.freq else build_frequency(docs)
            vocab = _vocab_for_mapping(args, freq)
            mapping = _make_mapping(kind, freq, vocab, args.seed)

        def run(item):
            return mapping.apply(item[1])

    elif kind in ("stencil", "pstencil"):
        _require(args, "embeddings")
        table = load_embeddings(args.embeddings)
        scfg = StencilConfig(args.window, args.sigma, kind == "pstencil", Metric(args.metric))

        def run(item):
            idx, toks = item
            try:
                return privatize_stencil(toks, table, scfg)
            except OutOfVocabularyError as exc:
                raise FormatError(str(exc), idx + 1, args.input) from None

    elif kind == "noise":
        _require(args, "embeddings", "seed")
        table = load_embeddings(args.embeddings)
        ncfg = NoiseConfig(args.eta, Metric(args.metric), args.seed)

        def run(item):
            idx, toks = item
            try:
                return privatize_noise(toks, table, ncfg, sequence_index=idx)
            except OutOfVocabularyError as exc:
                raise FormatError(str(exc), idx + 1, args.input) from None

    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown mapper {kind}")

    outputs = parallel_map(run, list(enumerate(docs)), args.workers)
    with _out(args.output) as fh:
        write_dataset((Record(r.label, detokenize(o)) for r, o in zip(records, outputs)), fh)


def _pairs(args) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    truth = read_dataset(args.truth)
    observed = read_dataset(args.input)
    if len(truth) != len(observed):
        raise UsageError(
            f"--truth has {len(truth)} records but --input has {len(observed)}"
        )
    cfg = _tok_config(args)
    pairs = []
    for i, (t, o) in enumerate(zip(truth, observed), start=1):
        if t.label != o.label:
            raise FormatError(f"label mismatch ({t.label!r} vs {o.label!r})", i, args.input)
        pairs.append((tokenize(t.text, cfg), tuple(o.text.split())))
    return pairs


def cmd_attack(args) -> None:
    pairs = _pairs(args)
    if args.attack == "oracle":
        mapping = deserialize(args.mapping)
        scorer = load_scorer(args.lm)
        config = AttackConfig(args.pi, args.max_beam)
        report = evaluate_oracle(pairs, mapping, scorer, config, k=args.k, workers=args.workers)
    else:
        table = load_embeddings(args.embeddings)
        try:
            report = evaluate_nn(
                pairs, table, args.k, Metric(args.metric), not args.include_self, args.workers
            )
        except OutOfVocabularyError as exc:
            raise FormatError(str(exc), source=args.input) from None
    with _out(args.out) as fh:
        json.dump(report.to_json(normalize=args.normalize), fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def cmd_eval(args) -> None:
    cfg = _tok_config(args)
    result: dict = {"schema_version": 1}
    if args.original:
        originals = [tokenize(r.text, cfg) for r in read_dataset(args.original)]
        if args.privatized:
            privs = [tuple(r.text.split()) for r in read_dataset(args.privatized)]
            if len(privs) != len(originals):
                raise UsageError("--original and --privatized differ in record count")
            same = total = 0
            for i, (a, b) in enumerate(zip(originals, privs), start=1):
                if len(a) != len(b):
                    raise FormatError("token count differs from the original", i, args.privatized)
                same += sum(x == y for x, y in zip(a, b))
                total += len(a)
            result["unchanged_positions"] = same / total if total else None
        if args.mapping:
            mapping = deserialize(args.mapping)
            result["unchanged_fraction"] = unchanged_fraction(mapping, build_frequency(originals))
    reports = []
    for path in args.report or []:
        with open(path, encoding="utf-8") as fh:
            rep = json.load(fh)
        reports.append({"file": path, "attack": rep.get("attack"), **rep.get("aggregate", {})})
    if reports:
        result["attacks"] = reports
    with _out(args.out) as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokpriv",
        description="Token-level text privatization and reconstruction attacks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-freq", help="count token frequencies (TSV token<TAB>count)")
    p.add_argument("--corpus", help="plain-text corpus, one document per line")
    p.add_argument("--dataset", help="label<TAB>text dataset")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--workers", type=int, default=1, help="counting threads")
    _add_tokenizer_flags(p)
    p.set_defaults(func=cmd_build_freq)

    p = sub.add_parser("gen-mapping", help="build a tuple mapping file")
    p.add_argument("--kind", required=True, choices=sorted(TUPLE_KINDS))
    p.add_argument("--freq", required=True, help="frequency file from build-freq")
    p.add_argument(
        "--embeddings",
        help="take the vocabulary from this embedding file (default: the frequency file's tokens)",
    )
    p.add_argument("--seed", type=int, help="random seed (required for random2/random3)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_gen_mapping)

    p = sub.add_parser("lm-train", help="train an n-gram scorer for the oracle attacker")
    p.add_argument("--corpus", help="plain-text corpus, one sequence per line")
    p.add_argument("--dataset", help="label<TAB>text dataset")
    p.add_argument("--order", type=int, default=3, help="n-gram order, 1..5 (default 3)")
    p.add_argument(
        "--smoothing",
        help="add_k:K, interp:L1,L2,... (highest order first) or mle (default: interp 0.6,0.3,0.1 for order 3)",
    )
    p.add_argument("--out", help="output model file (default: stdout)")
    _add_tokenizer_flags(p)
    p.set_defaults(func=cmd_lm_train)

    p = sub.add_parser("privatize", help="privatize the text column of a dataset")
    p.add_argument("--input", required=True, help="label<TAB>text dataset")
    p.add_argument("--output", help="output dataset (default: stdout)")
    p.add_argument(
        "--mapper",
        required=True,
        choices=["tuple", *sorted(TUPLE_KINDS), "stencil", "pstencil", "noise"],
    )
    p.add_argument("--mapping", help="mapping file for --mapper tuple")
    p.add_argument("--freq", help="frequency file for on-the-fly mappings (default: the input's own counts)")
    p.add_argument("--embeddings", help="embedding file (stencil, pstencil, noise)")
    p.add_argument("--window", type=int, default=9, help="stencil window, odd (default 9)")
    p.add_argument("--sigma", type=float, default=0.8, help="stencil gaussian std (default 0.8)")
    p.add_argument("--eta", type=float, default=150.0, help="noise parameter; larger is less noise (default 150)")
    p.add_argument("--metric", choices=[m.value for m in Metric], default="euclidean")
    p.add_argument("--seed", type=int, help="random seed (required for random2, random3, noise)")
    p.add_argument("--workers", type=int, default=1, help="records processed in parallel")
    _add_tokenizer_flags(p)
    p.set_defaults(func=cmd_privatize)

    p = sub.add_parser("attack", help="run a reconstruction attack and write a JSON report")
    asub = p.add_subparsers(dest="attack", required=True)
    for name, helptext in (("oracle", "beam-search attacker that knows the mapping"),
                           ("nn", "nearest-neighbor token inversion")):
        a = asub.add_parser(name, help=helptext)
        a.add_argument("--input", required=True, help="privatized dataset")
        a.add_argument("--truth", required=True, help="original dataset, same record order")
        a.add_argument("--k", type=int, default=5, help="cutoff for precision@k (default 5)")
        a.add_argument("--out", help="report file (default: stdout)")
        a.add_argument("--normalize", action="store_true", help="report edit distance divided by length")
        a.add_argument("--workers", type=int, default=1, help="records attacked in parallel")
        _add_tokenizer_flags(a)
        a.set_defaults(func=cmd_attack)
        if name == "oracle":
            a.add_argument("--mapping", required=True, help="mapping file")
            a.add_argument("--lm", required=True, help="scorer file from lm-train (or a table scorer)")
            a.add_argument("--pi", type=float, default=0.85, help="beam mass to retain (default 0.85)")
            a.add_argument("--max-beam", type=int, help="hard cap on beam size")
        else:
            a.add_argument("--embeddings", required=True, help="embedding file")
            a.add_argument("--metric", choices=[m.value for m in Metric], default="cosine")
            a.add_argument(
                "--include-self",
                action="store_true",
                help="let the privatized token itself be a candidate (use for the noise mapper)",
            )

    p = sub.add_parser("eval", help="unchanged-token fractions and attack summaries")
    p.add_argument("--original", help="original dataset")
    p.add_argument("--privatized", help="privatized dataset (positionwise unchanged fraction)")
    p.add_argument("--mapping", help="mapping file (corpus-mass unchanged fraction over --original)")
    p.add_argument("--report", action="append", help="attack report to summarize (repeatable)")
    p.add_argument("--out", help="output file (default: stdout)")
    _add_tokenizer_flags(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except (UsageError, FormatError, OutOfVocabularyError, ValueError, OSError) as exc:
        print(f"tokpriv {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
