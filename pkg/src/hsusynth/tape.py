"""A small reverse-mode differentiation tape over numpy arrays.

Each operation computes its value eagerly and, when the tape is recording,
appends a closure that pushes the output gradient back to its inputs.
``backward`` replays the closures in reverse order.

Batched tensors keep the batch on axis 0; linear maps use the ``x @ W.T``
convention so a weight of shape ``(out, in)`` reads like ``W x``.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.special import expit


class Tensor:
    __slots__ = ("value", "grad", "name")

    def __init__(self, value: np.ndarray, name: str | None = None):
        self.value = value
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.array(g, dtype=float, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor({self.name or ''}{self.value.shape})"


def slot_log_softmax(logits: np.ndarray, n_types: int, n_tokens: int, k: int):
    """Per-slot log-softmax of rows of width ``n_types + k*n_tokens``.

    Returns ``(type_logp, token_logp)`` of shapes ``(N, n_types)`` and
    ``(N, k, n_tokens)``.
    """
    ty = logits[:, :n_types]
    tok = logits[:, n_types:].reshape(len(logits), k, n_tokens)
    ty = ty - ty.max(axis=-1, keepdims=True)
    tok = tok - tok.max(axis=-1, keepdims=True)
    ty = ty - np.log(np.exp(ty).sum(axis=-1, keepdims=True))
    tok = tok - np.log(np.exp(tok).sum(axis=-1, keepdims=True))
    return ty, tok


def slot_softmax(logits: np.ndarray, n_types: int, n_tokens: int, k: int) -> np.ndarray:
    """Per-slot probabilities laid out like the input rows."""
    ty, tok = slot_log_softmax(np.atleast_2d(logits), n_types, n_tokens, k)
    out = np.concatenate([np.exp(ty), np.exp(tok).reshape(len(ty), -1)], axis=1)
    return out.reshape(np.shape(logits))


class Tape:
    def __init__(self, record: bool = True):
        self.record = record
        self.params: dict[str, Tensor] = {}
        self._ops: list[Callable[[], None]] = []

    def __len__(self):
        return len(self._ops)

    # -- leaves
    def param(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(value, name)
        self.params[name] = t
        return t

    def watch(self, arrays: dict[str, np.ndarray]) -> dict[str, Tensor]:
        return {name: self.param(name, value) for name, value in arrays.items()}

    @staticmethod
    def const(value) -> Tensor:
        return Tensor(np.asarray(value, dtype=float))

    def _push(self, fn: Callable[[], None]):
        if self.record:
            self._ops.append(fn)

    # -- operations
    def linear(self, x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
        value = x.value @ w.value.T
        if b is not None:
            value = value + b.value
        out = Tensor(value)

        def back():
            g = out.grad
            if g is None:
                return
            w._accumulate(g.T @ x.value)
            x._accumulate(g @ w.value)
            if b is not None:
                b._accumulate(g.sum(axis=0))

        self._push(back)
        return out

    def embed(self, w: Tensor, indices: np.ndarray, n_types: int, n_tokens: int) -> Tensor:
        """``W @ x`` for slot-encoded ``x`` given as ``(B, 1+k)`` slot indices."""
        cols = self.slot_columns(indices, n_types, n_tokens)
        value = w.value[:, cols].sum(axis=2).T
        out = Tensor(value)

        def back():
            g = out.grad
            if g is None:
                return
            full = np.zeros_like(w.value)
            for j in range(cols.shape[1]):
                np.add.at(full.T, cols[:, j], g)
            w._accumulate(full)

        self._push(back)
        return out

    @staticmethod
    def slot_columns(indices: np.ndarray, n_types: int, n_tokens: int) -> np.ndarray:
        indices = np.asarray(indices)
        offsets = np.concatenate([[0], n_types + n_tokens * np.arange(indices.shape[1] - 1)])
        return indices + offsets

    def concat(self, xs: Sequence[Tensor], axis: int = 1) -> Tensor:
        out = Tensor(np.concatenate([x.value for x in xs], axis=axis))

        def back():
            if out.grad is None:
                return
            start = 0
            for x in xs:
                stop = start + x.value.shape[axis]
                x._accumulate(out.grad[start:stop] if axis == 0 else out.grad[:, start:stop])
                start = stop

        self._push(back)
        return out

    def split(self, x: Tensor, sizes: Sequence[int], axis: int = 1) -> list[Tensor]:
        """Cut a 2-d tensor into consecutive pieces of the given sizes."""
        bounds = np.cumsum([0, *sizes])
        if axis == 0:
            pieces = [Tensor(x.value[a:b]) for a, b in zip(bounds, bounds[1:])]
        else:
            pieces = [Tensor(x.value[:, a:b]) for a, b in zip(bounds, bounds[1:])]

        def back():
            if all(p.grad is None for p in pieces):
                return
            grads = [p.grad if p.grad is not None else np.zeros_like(p.value) for p in pieces]
            x._accumulate(np.concatenate(grads, axis=axis))

        self._push(back)
        return pieces

    def rows(self, x: Tensor, index) -> Tensor:
        """Basic (slice) indexing along axis 0."""
        out = Tensor(x.value[index])

        def back():
            if out.grad is None:
                return
            g = np.zeros_like(x.value)
            g[index] = out.grad
            x._accumulate(g)

        self._push(back)
        return out

    def _unary(self, x: Tensor, value: np.ndarray, local: Callable[[np.ndarray], np.ndarray]) -> Tensor:
        out = Tensor(value)

        def back():
            if out.grad is not None:
                x._accumulate(out.grad * local(out.value))

        self._push(back)
        return out

    def sigmoid(self, x: Tensor) -> Tensor:
        return self._unary(x, expit(x.value), lambda y: y * (1.0 - y))

    def tanh(self, x: Tensor) -> Tensor:
        return self._unary(x, np.tanh(x.value), lambda y: 1.0 - y * y)

    def one_minus(self, x: Tensor) -> Tensor:
        return self._unary(x, 1.0 - x.value, lambda y: -np.ones_like(y))

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        out = Tensor(a.value * b.value)

        def back():
            if out.grad is None:
                return
            a._accumulate(out.grad * b.value)
            b._accumulate(out.grad * a.value)

        self._push(back)
        return out

    def add(self, *xs: Tensor) -> Tensor:
        out = Tensor(sum(x.value for x in xs))

        def back():
            if out.grad is None:
                return
            for x in xs:
                x._accumulate(out.grad)

        self._push(back)
        return out

    def scale(self, x: Tensor, c: float) -> Tensor:
        return self._unary(x, x.value * c, lambda y: np.full_like(y, c))

    def sum(self, x: Tensor) -> Tensor:
        out = Tensor(np.asarray(x.value.sum()))

        def back():
            if out.grad is not None:
                x._accumulate(np.broadcast_to(out.grad, x.value.shape))

        self._push(back)
        return out

    def slot_cross_entropy(
        self,
        logits: Tensor,
        targets: np.ndarray,
        weights: np.ndarray,
        n_types: int,
        n_tokens: int,
        k: int,
    ) -> Tensor:
        """Weighted sum over rows of the per-slot cross-entropy.

        ``targets`` holds ``(N, 1+k)`` slot indices and ``weights`` one
        non-negative factor per row.
        """
        n = len(targets)
        ty, tok = slot_log_softmax(logits.value, n_types, n_tokens, k)
        rows = np.arange(n)
        nll = -ty[rows, targets[:, 0]]
        nll = nll - tok[rows[:, None], np.arange(k)[None, :], targets[:, 1:]].sum(axis=1)
        out = Tensor(np.asarray(float(weights @ nll)))

        def back():
            if out.grad is None:
                return
            g_ty = np.exp(ty)
            g_ty[rows, targets[:, 0]] -= 1.0
            g_tok = np.exp(tok)
            g_tok[rows[:, None], np.arange(k)[None, :], targets[:, 1:]] -= 1.0
            g = np.concatenate([g_ty, g_tok.reshape(n, -1)], axis=1)
            logits._accumulate(g * (weights[:, None] * out.grad))

        self._push(back)
        return out


def backward(tape: Tape, loss: Tensor) -> dict[str, np.ndarray]:
    """Gradients of scalar ``loss`` for every parameter registered on ``tape``.

    Parameters the forward pass never touched receive zeros.
    """
    for t in tape.params.values():
        t.grad = None
    loss.grad = np.ones_like(loss.value, dtype=float)
    for fn in reversed(tape._ops):
        fn()
    return {
        name: (t.grad if t.grad is not None else np.zeros_like(t.value))
        for name, t in tape.params.items()
    }
