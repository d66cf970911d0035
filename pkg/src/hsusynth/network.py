"""Top-down, bottom-up and sequential passes over sub-trees, the three
losses, and the SGD training loop.

All passes run batched: a minibatch of sub-trees is a ``(B, 1+k)`` array of
parent slot indices, a ``(B, d_max, 1+k)`` array of child slot indices and a
``(B, d_max)`` child mask.  Child states are stacked child-major, so row
``i*B + b`` belongs to child ``i`` of instance ``b``.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .encoding import NodeVector, SubTreeBatch, Vocabulary, build_vocabulary, sample_subtrees
from .grammar import ProgramAst
from .tape import Tape, Tensor, backward, slot_softmax
from .units import (
    ESU_GATES,
    ISU_GATES,
    Dims,
    HsuParameters,
    esu_forward,
    isu_forward,
    sgd_step,
)

log = logging.getLogger(__name__)


class NonFiniteLoss(FloatingPointError):
    def __init__(self, batch_ids: Sequence[str], value: float):
        self.batch_ids = list(batch_ids)
        super().__init__(f"loss {value} on batch {', '.join(self.batch_ids)}")


@dataclass
class TrainConfig:
    lr: float = 0.1
    alpha: float = 1.0
    beta: float = 1.0
    epochs: int = 1250
    minibatch: int = 8
    seed: int = 7
    d_h: int = 64
    init_scale: float = 0.08
    # init range of the input embedding; None means init_scale.  A wider
    # range lets a node's own content dominate its sibling-chain state.
    embed_scale: float | None = 2.0
    # cap on sub-tree instances consumed; None means epochs alone decide
    max_iterations: int | None = 50_000
    # global gradient-norm ceiling applied before each step; None disables
    clip_norm: float | None = 5.0
    tol: float = 1e-6
    patience: int = 5

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 0 or self.minibatch < 1 or self.d_h < 1:
            raise ValueError("lr, minibatch and d_h must be positive and epochs non-negative")


@dataclass
class Encoded:
    parent: np.ndarray
    children: np.ndarray
    mask: np.ndarray
    ids: list[str] = field(default_factory=list)

    @classmethod
    def from_batches(cls, batches: Sequence[SubTreeBatch]) -> "Encoded":
        return cls(
            np.array([b.parent.indices for b in batches], dtype=np.int64),
            np.array([[c.indices for c in b.children] for b in batches], dtype=np.int64),
            np.array([b.child_mask for b in batches], dtype=float),
            [b.source for b in batches],
        )

    def __len__(self):
        return len(self.parent)


def dims_for(vocab: Vocabulary, d_h: int) -> Dims:
    return Dims(vocab.n_types, vocab.n_tokens, vocab.k, vocab.d_max, d_h)


class Net:
    """Parameters registered on one tape, with the unit wiring on top."""

    def __init__(self, params: HsuParameters, tape: Tape | None = None):
        self.dims = params.dims
        self.tape = tape if tape is not None else Tape(record=False)
        self.w = self.tape.watch(params.arrays)
        self.isu = {g: self.w[f"isu.{g}"] for g in ISU_GATES}
        self.leaf = {g: self.w[f"esu_leaf.{g}"] for g in ESU_GATES}
        self.agg = {g: self.w[f"esu_agg.{g}"] for g in ESU_GATES}

    def embed(self, indices: np.ndarray) -> Tensor:
        d = self.dims
        return self.tape.embed(self.w["input_embed"], indices, d.n_types, d.n_tokens)

    def head(self, name: str, states: Tensor) -> Tensor:
        return self.tape.linear(states, self.w[f"W_{name}"], self.w[f"b_{name}"])

    def ce(self, logits: Tensor, targets: np.ndarray, weights: np.ndarray) -> Tensor:
        d = self.dims
        return self.tape.slot_cross_entropy(logits, targets, weights, d.n_types, d.n_tokens, d.k)

    # -- unit chains
    def father_state(self, parent_emb: Tensor) -> Tensor:
        return isu_forward(self.tape, None, parent_emb, self.isu)

    def child_states_down(self, father: Tensor, n: int) -> list[Tensor]:
        states, prev = [], None
        for _ in range(n):
            prev = isu_forward(self.tape, prev, father, self.isu)
            states.append(prev)
        return states

    def child_states_up(self, child_embs: Sequence[Tensor]) -> list[Tensor]:
        states, prev = [], None
        for emb in child_embs:
            prev = esu_forward(self.tape, prev, emb, self.leaf)
            states.append(prev)
        return states

    def parent_state_up(self, child_states: Sequence[Tensor]) -> Tensor:
        return esu_forward(self.tape, None, self.tape.concat(list(child_states)), self.agg)

    def probs(self, logits: Tensor) -> np.ndarray:
        d = self.dims
        return slot_softmax(logits.value, d.n_types, d.n_tokens, d.k)

    # -- the three training losses, summed over the instances of ``enc``
    def losses(self, enc: Encoded) -> tuple[Tensor, Tensor, Tensor | None]:
        t = self.tape
        B, n = enc.children.shape[:2]
        emb = self.embed(np.concatenate([enc.parent, enc.children.reshape(B * n, -1)]))
        parent_emb = t.rows(emb, slice(0, B))
        child_embs = [t.rows(emb, slice(B + i, B + B * n, n)) for i in range(n)]
        child_targets = enc.children.transpose(1, 0, 2).reshape(n * B, -1)

        down = self.child_states_down(self.father_state(parent_emb), n)
        l_isu = self.ce(self.head("down", t.concat(down, axis=0)), child_targets, enc.mask.T.reshape(-1))

        up_states = self.child_states_up(child_embs)
        l_esu = self.ce(self.head("up", self.parent_state_up(up_states)), enc.parent, np.ones(B))

        if n < 2:
            return l_isu, l_esu, None
        stacked = t.concat(up_states, axis=0)
        ones = np.ones((n - 1) * B)
        right = self.ce(self.head("right", t.rows(stacked, slice(0, (n - 1) * B))), child_targets[B:], ones)
        left = self.ce(self.head("left", t.rows(stacked, slice(B, n * B))), child_targets[: (n - 1) * B], ones)
        return l_isu, l_esu, t.add(right, left)

    def joint(self, enc: Encoded, alpha: float, beta: float) -> Tensor:
        l_isu, l_esu, l_hsu = self.losses(enc)
        parts = [l_isu, self.tape.scale(l_esu, alpha)]
        if l_hsu is not None:
            parts.append(self.tape.scale(l_hsu, beta))
        return self.tape.add(*parts)


def _one(vectors: Sequence[NodeVector]) -> np.ndarray:
    return np.array([v.indices for v in vectors], dtype=np.int64)


def top_down_pass(y: NodeVector, params: HsuParameters) -> list[np.ndarray]:
    """Per-slot distributions for the ``d_max`` children of parent ``y``."""
    net = Net(params)
    father = net.father_state(net.embed(_one([y])))
    return [net.probs(net.head("down", h))[0] for h in net.child_states_down(father, params.dims.d_max)]


def bottom_up_pass(children: Sequence[NodeVector], params: HsuParameters) -> np.ndarray:
    """Per-slot distribution for the parent of a padded child list."""
    net = Net(params)
    embs = [net.embed(_one([c])) for c in children]
    return net.probs(net.head("up", net.parent_state_up(net.child_states_up(embs))))[0]


def sequential_pass(children: Sequence[NodeVector], params: HsuParameters) -> list[tuple[np.ndarray, np.ndarray]]:
    """``(left, right)`` neighbour distributions for every child in the chain."""
    net = Net(params)
    states = net.child_states_up([net.embed(_one([c])) for c in children])
    return [(net.probs(net.head("left", h))[0], net.probs(net.head("right", h))[0]) for h in states]


def _as_batches(batch) -> list[SubTreeBatch]:
    return [batch] if isinstance(batch, SubTreeBatch) else list(batch)


def loss_terms(batch, params: HsuParameters) -> tuple[float, float, float]:
    """``(L_ISU, L_ESU, L_HSU)`` summed over the given sub-tree(s)."""
    net = Net(params)
    l_isu, l_esu, l_hsu = net.losses(Encoded.from_batches(_as_batches(batch)))
    return float(l_isu.value), float(l_esu.value), float(l_hsu.value) if l_hsu is not None else 0.0


def loss_isu(batch, params: HsuParameters) -> float:
    return loss_terms(batch, params)[0]


def loss_esu(batch, params: HsuParameters) -> float:
    return loss_terms(batch, params)[1]


def loss_hsu(batch, params: HsuParameters) -> float:
    return loss_terms(batch, params)[2]


def joint_loss(batch, params: HsuParameters, config: TrainConfig | None = None) -> float:
    config = config or TrainConfig()
    l_isu, l_esu, l_hsu = loss_terms(batch, params)
    return l_isu + config.alpha * l_esu + config.beta * l_hsu


def joint_gradients(batch, params: HsuParameters, alpha: float = 1.0, beta: float = 1.0, mean: bool = False):
    """Loss value and gradients of the joint objective for every parameter."""
    enc = batch if isinstance(batch, Encoded) else Encoded.from_batches(_as_batches(batch))
    tape = Tape()
    net = Net(params, tape)
    loss = net.joint(enc, alpha, beta)
    if mean:
        loss = tape.scale(loss, 1.0 / len(enc))
    return float(loss.value), backward(tape, loss)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Rescale ``grads`` in place so their joint L2 norm is at most ``max_norm``."""
    norm = float(np.sqrt(sum(float(np.vdot(g, g)) for g in grads.values())))
    if norm > max_norm:
        for g in grads.values():
            g *= max_norm / norm
    return norm


@dataclass
class Model:
    params: HsuParameters
    vocab: Vocabulary
    config: TrainConfig
    # statement lines seen more than once in the training corpus, with their count
    repeated_lines: dict[tuple[str, ...], int] = field(default_factory=dict)
    history: list[float] = field(default_factory=list)
    iterations: int = 0


def repeated_lines(corpus: Sequence[ProgramAst]) -> dict[tuple[str, ...], int]:
    counts = Counter(tuple(texts) for ast in corpus for _, texts in ast.statement_lines())
    return {line: c for line, c in sorted(counts.items()) if c > 1}


def train(
    corpus: Sequence[ProgramAst],
    config: TrainConfig,
    names: Sequence[str] | None = None,
    on_epoch: Callable[[int, float, Model], None] | None = None,
) -> Model:
    """Fit the joint objective with minibatch SGD over all sampled sub-trees.

    Each epoch shuffles the sub-trees with a generator seeded from
    ``config.seed``.  Training stops at the epoch budget, at
    ``config.max_iterations`` consumed sub-trees, or once the epoch mean
    loss moved less than ``config.tol`` over ``config.patience`` epochs.
    """
    vocab = build_vocabulary(corpus)
    names = list(names) if names is not None else [f"p{i}" for i in range(len(corpus))]
    batches = [b for ast, name in zip(corpus, names) for b in sample_subtrees(ast, vocab, name)]
    params = HsuParameters.init(
        dims_for(vocab, config.d_h), config.seed, config.init_scale, embed_scale=config.embed_scale
    )
    model = Model(params, vocab, config, repeated_lines(corpus))
    rng = np.random.default_rng(config.seed)
    budget = config.max_iterations

    for epoch in range(config.epochs):
        order = rng.permutation(len(batches))
        total, seen = 0.0, 0
        for start in range(0, len(order), config.minibatch):
            if budget is not None and model.iterations >= budget:
                break
            chunk = [batches[i] for i in order[start : start + config.minibatch]]
            if budget is not None:
                chunk = chunk[: budget - model.iterations]
            enc = Encoded.from_batches(chunk)
            value, grads = joint_gradients(enc, params, config.alpha, config.beta, mean=True)
            if not np.isfinite(value):
                raise NonFiniteLoss(enc.ids, value)
            if config.clip_norm is not None:
                clip_gradients(grads, config.clip_norm)
            sgd_step(params, grads, config.lr)
            total += value * len(chunk)
            seen += len(chunk)
            model.iterations += len(chunk)
        if seen:
            model.history.append(total / seen)
        if on_epoch is not None and seen:
            on_epoch(epoch, model.history[-1], model)
        log.debug("epoch %d mean loss %.6f", epoch, model.history[-1] if seen else float("nan"))
        if budget is not None and model.iterations >= budget:
            break
        h = model.history
        if len(h) > config.patience and abs(h[-1] - h[-1 - config.patience]) < config.tol:
            break
    return model


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
