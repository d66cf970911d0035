"""ESU and ISU gated units, the parameter container, and plain SGD.

Both units take a left-sibling state and a second input (the children for
ESU, the father for ISU).  Two gates rescale those inputs; two selection
gates then mix the four combinations of original and rescaled inputs:

    out = z*r*tanh(W[s~, o~]) + (1-z)*r*tanh(W[s, o~])
        + z*(1-r)*tanh(W[s~, o]) + (1-z)*(1-r)*tanh(W[s, o])

ESU uses gates (f, e, z, r) with mixing matrix ``W_u``; ISU uses
(g, t, y, s) with ``W_v``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tape import Tape, Tensor

ESU_GATES = ("W_f", "W_e", "W_u", "W_z", "W_r")
ISU_GATES = ("W_g", "W_t", "W_v", "W_y", "W_s")
HEADS = ("down", "up", "left", "right")


class DimensionMismatch(ValueError):
    pass


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass(frozen=True)
class Dims:
    n_types: int
    n_tokens: int
    k: int
    d_max: int
    d_h: int

    @property
    def dim(self) -> int:
        return self.n_types + self.k * self.n_tokens


def parameter_shapes(dims: Dims) -> dict[str, tuple[int, ...]]:
    h, D, agg = dims.d_h, dims.dim, dims.d_max * dims.d_h
    shapes: dict[str, tuple[int, ...]] = {}
    for width, prefix in ((h, "esu_leaf"), (agg, "esu_agg")):
        shapes[f"{prefix}.W_f"] = (h, h + width)
        shapes[f"{prefix}.W_e"] = (width, h + width)
        for name in ("W_u", "W_z", "W_r"):
            shapes[f"{prefix}.{name}"] = (h, h + width)
    for name in ISU_GATES:
        shapes[f"isu.{name}"] = (h, 2 * h)
    shapes["input_embed"] = (h, D)
    for head in HEADS:
        shapes[f"W_{head}"] = (D, h)
        shapes[f"b_{head}"] = (D,)
    return shapes


@dataclass
class HsuParameters:
    dims: Dims
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def init(
        cls,
        dims: Dims,
        seed: int = 7,
        scale: float = 0.08,
        zero_heads: bool = False,
        embed_scale: float | None = None,
    ) -> "HsuParameters":
        rng = np.random.default_rng(seed)
        arrays = {}
        for name, shape in parameter_shapes(dims).items():
            if zero_heads and name.split("_")[0] in ("W", "b") and name[2:] in HEADS:
                arrays[name] = np.zeros(shape)
            else:
                width = embed_scale if name == "input_embed" and embed_scale is not None else scale
                arrays[name] = rng.uniform(-width, width, size=shape)
        return cls(dims, arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def copy(self) -> "HsuParameters":
        return HsuParameters(self.dims, {n: a.copy() for n, a in self.arrays.items()})

    def group(self, prefix: str) -> dict[str, np.ndarray]:
        return {n.split(".", 1)[1]: a for n, a in self.arrays.items() if n.startswith(prefix + ".")}

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays.values())


def _zeros_like_rows(ref: Tensor, width: int) -> Tensor:
    return Tensor(np.zeros((ref.value.shape[0], width)))


def _gated_unit(
    tape: Tape,
    sibling: Tensor,
    other: Tensor,
    w_keep_sibling: Tensor,
    w_keep_other: Tensor,
    w_mix: Tensor,
    w_sel_a: Tensor,
    w_sel_b: Tensor,
    gates: dict | None,
    names: tuple[str, str, str, str],
    clamp: bool,
) -> Tensor:
    h, width = sibling.value.shape[1], other.value.shape[1]
    both = tape.concat([sibling, other])
    if clamp:
        # test harness: rescaling gates pinned to one
        sib_t, other_t = sibling, other
        g1 = Tensor(np.ones_like(sibling.value))
        g2 = Tensor(np.ones_like(other.value))
        a, b = tape.split(tape.sigmoid(tape.linear(both, tape.concat([w_sel_a, w_sel_b], axis=0))), [h, h])
    else:
        # the four gates share their input, so one stacked projection serves all
        stacked = tape.concat([w_keep_sibling, w_keep_other, w_sel_a, w_sel_b], axis=0)
        g1, g2, a, b = tape.split(tape.sigmoid(tape.linear(both, stacked)), [h, width, h, h])
        sib_t = tape.mul(g1, sibling)
        other_t = tape.mul(g2, other)
    # the four candidate states, stacked along the batch axis for one product
    inputs = [
        tape.concat([sib_t, other_t]),
        tape.concat([sibling, other_t]),
        tape.concat([sib_t, other]),
        both,
    ]
    n = sibling.value.shape[0]
    c1, c2, c3, c4 = tape.split(tape.tanh(tape.linear(tape.concat(inputs, axis=0), w_mix)), [n] * 4, axis=0)
    not_a, not_b = tape.one_minus(a), tape.one_minus(b)
    # z*r*c1 + (1-z)*r*c2 + z*(1-r)*c3 + (1-z)*(1-r)*c4, factored over r
    with_b = tape.add(tape.mul(a, c1), tape.mul(not_a, c2))
    without_b = tape.add(tape.mul(a, c3), tape.mul(not_a, c4))
    if gates is not None:
        for name, val in zip(names, (g1, g2, a, b)):
            gates[name] = val.value
    return tape.add(tape.mul(b, with_b), tape.mul(not_b, without_b))


def _check(weights: dict[str, Tensor], sibling: Tensor, other: Tensor, keep_other: str):
    h = sibling.value.shape[1]
    width = other.value.shape[1]
    if sibling.value.shape[0] != other.value.shape[0]:
        raise DimensionMismatch("batch sizes of the two inputs differ")
    for name, w in weights.items():
        rows = width if name == keep_other else h
        if w.value.shape != (rows, h + width):
            raise DimensionMismatch(f"{name} has shape {w.value.shape}, expected {(rows, h + width)}")


def esu_forward(
    tape: Tape,
    h_sibling: Tensor | None,
    h_children: Tensor,
    weights: dict[str, Tensor],
    gates: dict | None = None,
    clamp: bool = False,
) -> Tensor:
    """Evolutional unit: left-sibling state plus child input, output of width d_h.

    ``h_sibling=None`` is the null (all-zero) sibling.  ``weights`` maps
    ``W_f, W_e, W_u, W_z, W_r`` to tensors; if ``gates`` is a dict it
    receives the f, e, z, r activations.
    """
    d_h = weights["W_u"].value.shape[0]
    sibling = h_sibling if h_sibling is not None else _zeros_like_rows(h_children, d_h)
    _check(weights, sibling, h_children, "W_e")
    return _gated_unit(
        tape, sibling, h_children,
        weights["W_f"], weights["W_e"], weights["W_u"], weights["W_z"], weights["W_r"],
        gates, ("f", "e", "z", "r"), clamp,
    )


def isu_forward(
    tape: Tape,
    h_sibling: Tensor | None,
    h_father: Tensor | None,
    weights: dict[str, Tensor],
    gates: dict | None = None,
    clamp: bool = False,
) -> Tensor:
    """Inherited unit: left-sibling state plus father state, output of width d_h."""
    d_h = weights["W_v"].value.shape[0]
    ref = h_sibling if h_sibling is not None else h_father
    if ref is None:
        raise DimensionMismatch("isu_forward needs at least one non-null input")
    sibling = h_sibling if h_sibling is not None else _zeros_like_rows(ref, d_h)
    father = h_father if h_father is not None else _zeros_like_rows(ref, d_h)
    _check(weights, sibling, father, "W_t")
    return _gated_unit(
        tape, sibling, father,
        weights["W_g"], weights["W_t"], weights["W_v"], weights["W_y"], weights["W_s"],
        gates, ("g", "t", "y", "s"), clamp,
    )


def sgd_step(params: HsuParameters, grads: dict[str, np.ndarray], lr: float) -> HsuParameters:
    """In-place ``p -= lr * g``; every gradient is checked for finiteness first."""
    for name, g in grads.items():
        if g.shape != params.arrays[name].shape:
            raise DimensionMismatch(f"gradient for {name} has shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient for {name}")
    for name, g in grads.items():
        params.arrays[name] -= lr * g
    return params
