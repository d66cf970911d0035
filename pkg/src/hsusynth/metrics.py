"""Slot-level classification metrics and the evaluation harness.

Every inference is scored as a multi-class labelling problem: predicted and
true token sequences are aligned slot by slot (the shorter one padded) and
each slot is one labelled sample.  Precision/recall/F1 come in micro, macro
and support-weighted flavours; reports give mean and standard deviation
over inference calls.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.metrics import precision_recall_fscore_support

from .encoding import PAD_TOKEN, encode_node
from .grammar import ProgramAst
from .network import Model
from .tasks import complete_program, generate_program, interpret_program, next_line_vector
from .encoding import decode_indices

METRICS = (
    "accuracy",
    "micro_precision", "micro_recall", "micro_f1",
    "macro_precision", "macro_recall", "macro_f1",
    "weighted_precision", "weighted_recall", "weighted_f1",
)
MODES = ("next-line", "generate", "interpret", "complete")


def align(predicted: Sequence[str], truth: Sequence[str]) -> tuple[list[str], list[str]]:
    n = max(len(predicted), len(truth), 1)
    return (
        list(predicted) + [PAD_TOKEN] * (n - len(predicted)),
        list(truth) + [PAD_TOKEN] * (n - len(truth)),
    )


def score_instance(predicted: Sequence[str], truth: Sequence[str]) -> dict[str, float]:
    pred, true = align(predicted, truth)
    scores = {"accuracy": float(np.mean([p == t for p, t in zip(pred, true)]))}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for avg in ("micro", "macro", "weighted"):
            p, r, f, _ = precision_recall_fscore_support(true, pred, average=avg, zero_division=0)
            scores[f"{avg}_precision"] = float(p)
            scores[f"{avg}_recall"] = float(r)
            scores[f"{avg}_f1"] = float(f)
    return scores


def line_labels(predicted: Sequence[tuple[int, list[str]]], truth: Sequence[tuple[int, list[str]]]):
    """Flatten two programs' lines into slot-aligned label sequences.

    Lines are paired by position; within a pair both token lists are padded
    to the longer one, and a missing line counts as an empty one.
    """
    pred_out, true_out = [], []
    for i in range(max(len(predicted), len(truth))):
        p = predicted[i][1] if i < len(predicted) else []
        t = truth[i][1] if i < len(truth) else []
        a, b = align(p, t)
        pred_out += a
        true_out += b
    return pred_out, true_out


@dataclass
class EvalReport:
    mode: str
    instance_count: int
    mean: dict[str, float]
    std: dict[str, float]
    exact: int
    programs: int
    flagged: list[str] = field(default_factory=list)

    @property
    def exact_match(self) -> float:
        return self.exact / self.programs if self.programs else 0.0

    @classmethod
    def from_scores(cls, mode: str, scores: list[dict[str, float]], exact: int, programs: int, flagged=()):
        arr = {m: np.array([s[m] for s in scores]) for m in METRICS}
        return cls(
            mode,
            len(scores),
            {m: float(a.mean()) if len(a) else 0.0 for m, a in arr.items()},
            {m: float(a.std()) if len(a) else 0.0 for m, a in arr.items()},
            exact,
            programs,
            list(flagged),
        )

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "instance_count": self.instance_count,
            "metrics": {m: {"mean": self.mean[m], "std": self.std[m]} for m in METRICS},
            "exact_match": self.exact_match,
            "exact": self.exact,
            "programs": self.programs,
            "ambiguous": self.flagged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        rows = [f"mode: {self.mode}", f"instances: {self.instance_count}"]
        rows += [f"{m}: {self.mean[m]:.3f} +- {self.std[m]:.3f}" for m in METRICS]
        rows.append(f"exact_match: {self.exact}/{self.programs} ({self.exact_match:.3f})")
        if self.flagged:
            rows.append("ambiguous: " + " ".join(self.flagged))
        return "\n".join(rows) + "\n"


def completion_lines(corpus: Sequence[tuple[str, ProgramAst]], seed: int) -> list[str]:
    """One randomly chosen source line per program, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    picks = []
    for _, ast in corpus:
        lines = ast.statement_lines()
        picks.append(" ".join(lines[int(rng.integers(len(lines)))][1]))
    return picks


def evaluate(model: Model, corpus: Sequence[tuple[str, ProgramAst]], mode: str, seed: int = 7) -> EvalReport:
    """Run one inference task over ``corpus`` (``(name, tree)`` pairs) and score it."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    vocab = model.vocab
    scores, exact, flagged = [], 0, []

    if mode == "next-line":
        for _, ast in corpus:
            ok = True
            for node in (n for _, n in ast.walk() if n.id != ast.root):
                siblings = ast[node.parent].children
                pos = siblings.index(node.id)
                truth = ast[siblings[pos + 1]].texts if pos + 1 < len(siblings) else []
                pred_vec = next_line_vector(encode_node(node, vocab), model)
                pred = [] if pred_vec.is_pad else [t.text for t in decode_indices(pred_vec.indices, vocab)[1]]
                scores.append(score_instance(pred, truth))
                ok = ok and pred == truth
            exact += ok
        return EvalReport.from_scores(mode, scores, exact, len(corpus))

    if mode == "interpret":
        for _, ast in corpus:
            truth = [t.text for t in ast.root_node.intention]
            pred = interpret_program(ast, model)
            scores.append(score_instance(pred, truth))
            exact += pred == truth
        return EvalReport.from_scores(mode, scores, exact, len(corpus))

    fragments = completion_lines(corpus, seed) if mode == "complete" else None
    for i, (name, ast) in enumerate(corpus):
        if mode == "generate":
            result = generate_program(" ".join(t.text for t in ast.root_node.intention), model)
        else:
            result = complete_program(fragments[i], model)
            if result.ambiguous:
                flagged.append(name)
        truth = ast.statement_lines()
        pred = result.lines
        scores.append(score_instance(*line_labels(pred, truth)))
        exact += pred == truth
    return EvalReport.from_scores(mode, scores, exact, len(corpus), flagged)
