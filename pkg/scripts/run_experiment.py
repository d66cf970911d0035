"""Train on a corpus, score every inference mode, and write a JSON summary.

    python3 scripts/run_experiment.py --out runs/default
    python3 scripts/run_experiment.py --out runs/wide --set d_h=96 --set epochs=800
"""
import argparse
import dataclasses
import json
import logging
import time
from pathlib import Path

from hsusynth import BUNDLED_CORPUS
from hsusynth.grammar import load_corpus
from hsusynth.metrics import MODES, evaluate
from hsusynth.modelio import save_model
from hsusynth.network import TrainConfig, train


def parse_overrides(pairs: list[str]) -> dict:
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    out = {}
    for pair in pairs:
        key, _, text = pair.partition("=")
        if key not in fields:
            raise SystemExit(f"unknown config field {key!r}; choose from {sorted(fields)}")
        default = getattr(TrainConfig(), key)
        if text.lower() == "none":
            out[key] = None
        elif isinstance(default, int) and not isinstance(default, bool):
            out[key] = int(text)
        else:
            out[key] = float(text)
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--corpus", type=Path, default=BUNDLED_CORPUS)
    parser.add_argument("--out", type=Path, required=True, help="directory for model.hsu and summary.json")
    parser.add_argument("--set", action="append", default=[], metavar="FIELD=VALUE", help="override a TrainConfig field")
    parser.add_argument("--eval-seed", type=int, default=7)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    corpus = load_corpus(args.corpus)
    config = TrainConfig(**parse_overrides(args.set))
    args.out.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()
    model = train([a for _, a in corpus], config, [n for n, _ in corpus])
    seconds = time.perf_counter() - start
    save_model(model, args.out / "model.hsu")
    logging.info("trained %d iterations in %.1fs", model.iterations, seconds)

    summary = {
        "config": dataclasses.asdict(config),
        "iterations": model.iterations,
        "train_seconds": seconds,
        "final_loss": model.history[-1] if model.history else None,
        "reports": {},
    }
    for mode in MODES:
        report = evaluate(model, corpus, mode, args.eval_seed)
        summary["reports"][mode] = report.to_dict()
        logging.info("%-9s accuracy %.3f  exact %d/%d", mode, report.mean["accuracy"], report.exact, report.programs)
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
