"""Command-line front end.

    hsusynth parse FILE
    hsusynth train --corpus DIR --out MODEL
    hsusynth generate --model MODEL --intention TEXT
    hsusynth interpret --model MODEL FILE
    hsusynth complete --model MODEL --line STMT
    hsusynth eval --model MODEL --corpus DIR --mode MODE

Exit status: 0 on success, 1 on usage errors, 2 on data or model errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import BUNDLED_CORPUS
from .encoding import EmptyCorpus
from .grammar import GrammarError, format_tree, load_corpus, parse_source
from .metrics import MODES, evaluate
from .modelio import CorruptModel, VersionMismatch, load_model, save_model
from .network import NonFiniteLoss, TrainConfig, train
from .tasks import GenerationConfig, complete_program, generate_program, interpret_program

DATA_ERRORS = (GrammarError, CorruptModel, VersionMismatch, EmptyCorpus, NonFiniteLoss, OSError, ValueError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage().rstrip()}\n{self.prog}: error: {message}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text} is negative")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return value


def _default_seed() -> int:
    try:
        return int(os.environ.get("HSU_SEED", "7"))
    except ValueError:
        return 7


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hsusynth", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, model=True):
        if model:
            p.add_argument("--model", required=True, type=Path)
        p.add_argument("--output", "-o", type=Path, help="write here instead of standard output")
        p.add_argument("--seed", type=int, default=_default_seed())
        p.add_argument("--max-depth", type=_positive_int, default=12)

    p = sub.add_parser("parse", help="print the statement-level tree of a file")
    p.add_argument("file", type=Path)
    common(p, model=False)

    p = sub.add_parser("train", help="train a model on a corpus directory")
    p.add_argument("--corpus", type=Path, default=BUNDLED_CORPUS)
    p.add_argument("--out", required=True, type=Path)
    defaults = TrainConfig()
    p.add_argument("--epochs", type=_non_negative_int, default=defaults.epochs)
    p.add_argument("--lr", type=_positive_float, default=defaults.lr)
    p.add_argument("--alpha", type=float, default=defaults.alpha)
    p.add_argument("--beta", type=float, default=defaults.beta)
    p.add_argument("--d-h", type=_positive_int, default=defaults.d_h)
    p.add_argument("--minibatch", type=_positive_int, default=defaults.minibatch)
    p.add_argument("--max-iterations", type=_positive_int, default=defaults.max_iterations)
    p.add_argument("--clip-norm", type=_positive_float, default=defaults.clip_norm)
    p.add_argument("--embed-scale", type=_positive_float, default=defaults.embed_scale)
    common(p, model=False)

    p = sub.add_parser("generate", help="generate a program from an intention")
    p.add_argument("--intention", required=True)
    common(p)

    p = sub.add_parser("interpret", help="infer the intention of a program file")
    p.add_argument("file", type=Path)
    common(p)

    p = sub.add_parser("complete", help="complete a program around a statement")
    p.add_argument("--line", required=True)
    common(p)

    p = sub.add_parser("eval", help="score a model on a corpus")
    p.add_argument("--corpus", type=Path, default=BUNDLED_CORPUS)
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--format", choices=("text", "json"), default="text")
    common(p)
    return parser


def _emit(text: str, output: Path | None):
    if not text.endswith("\n"):
        text += "\n"
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text, encoding="utf-8")


def _run(args) -> None:
    gen = GenerationConfig(max_depth=args.max_depth)
    if args.command == "parse":
        _emit(format_tree(parse_source(args.file.read_text(encoding="utf-8"))), args.output)
    elif args.command == "train":
        corpus = load_corpus(args.corpus)
        if not corpus:
            raise EmptyCorpus(f"no .alg files in {args.corpus}")
        config = TrainConfig(
            lr=args.lr, alpha=args.alpha, beta=args.beta, epochs=args.epochs,
            minibatch=args.minibatch, seed=args.seed, d_h=args.d_h,
            max_iterations=args.max_iterations, clip_norm=args.clip_norm,
            embed_scale=args.embed_scale,
        )
        names = [name for name, _ in corpus]
        model = train([ast for _, ast in corpus], config, names)
        save_model(model, args.out)
        last = f"{model.history[-1]:.6f}" if model.history else "n/a"
        _emit(f"trained {len(model.history)} epochs, {model.iterations} sub-tree iterations, "
              f"final mean loss {last}; wrote {args.out}", args.output)
    elif args.command == "generate":
        result = generate_program(args.intention, load_model(args.model), gen)
        text = result.source or "\n"
        if result.depth_exceeded:
            logging.warning("maximum depth reached; output is partial")
        _emit(text, args.output)
    elif args.command == "interpret":
        ast = parse_source(args.file.read_text(encoding="utf-8"))
        _emit(" ".join(interpret_program(ast, load_model(args.model))), args.output)
    elif args.command == "complete":
        result = complete_program(args.line, load_model(args.model), gen)
        if result.ambiguous:
            logging.warning("the input line occurs more than once in the training corpus; "
                            "the completion may follow either continuation")
        _emit(result.source or "\n", args.output)
    elif args.command == "eval":
        report = evaluate(load_model(args.model), load_corpus(args.corpus), args.mode, args.seed)
        _emit(report.to_json() if args.format == "json" else report.to_text(), args.output)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        _run(args)
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
