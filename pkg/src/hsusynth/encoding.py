"""Vocabulary construction, slot encoding of tree nodes, and sub-tree sampling.

A node is encoded as ``1 + k`` one-hot slots: one over the syntax types and
``k`` over the token set.  Everything downstream works with the per-slot
indices (``NodeVector.indices``); ``NodeVector.bits`` materialises the
binary vector of width ``|C| + k*|T|`` when needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grammar import (
    DegreeOverflow,
    ProgramAst,
    AstNode,
    SyntaxType,
    Token,
    classify,
)

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD, UNK = 0, 1

# pad first, then the tree-level types, then the token kinds
SYNTAX_TYPES: tuple[SyntaxType, ...] = tuple(SyntaxType)


class EmptyCorpus(ValueError):
    pass


class MalformedVector(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    syntax_types: tuple[SyntaxType, ...]
    tokens: tuple[str, ...]
    k: int
    d_max: int
    _type_index: dict = field(init=False, repr=False, compare=False)
    _token_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.syntax_types[0] is not SyntaxType.PAD:
            raise ValueError("syntax type 0 must be pad")
        if self.tokens[:2] != (PAD_TOKEN, UNK_TOKEN):
            raise ValueError("token 0 and 1 must be the pad and unknown entries")
        if self.k < 1 or self.d_max < 1:
            raise ValueError("k and d_max must be positive")
        object.__setattr__(self, "_type_index", {t: i for i, t in enumerate(self.syntax_types)})
        object.__setattr__(self, "_token_index", {t: i for i, t in enumerate(self.tokens)})

    @property
    def n_types(self) -> int:
        return len(self.syntax_types)

    @property
    def n_tokens(self) -> int:
        return len(self.tokens)

    @property
    def dim(self) -> int:
        return self.n_types + self.k * self.n_tokens

    def type_index(self, syntax_type: SyntaxType) -> int:
        return self._type_index[syntax_type]

    def token_index(self, text: str) -> int:
        return self._token_index.get(text, UNK)

    def to_dict(self) -> dict:
        return {
            "syntax_types": [t.value for t in self.syntax_types],
            "tokens": list(self.tokens),
            "k": self.k,
            "d_max": self.d_max,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(
            tuple(SyntaxType(v) for v in data["syntax_types"]),
            tuple(data["tokens"]),
            int(data["k"]),
            int(data["d_max"]),
        )


def node_content(node: AstNode) -> list[Token]:
    """Tokens a node contributes to its encoding; the root contributes its intention."""
    if node.syntax_type is SyntaxType.MODULE:
        return node.intention
    return node.tokens


def build_vocabulary(asts: Sequence[ProgramAst]) -> Vocabulary:
    if not asts:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    words: set[str] = set()
    k = 1
    d_max = 1
    for ast in asts:
        for _, node in ast.walk():
            content = node_content(node)
            words.update(t.text for t in content)
            k = max(k, len(content))
            d_max = max(d_max, len(node.children))
    words -= {PAD_TOKEN, UNK_TOKEN}
    return Vocabulary(SYNTAX_TYPES, (PAD_TOKEN, UNK_TOKEN, *sorted(words)), k, d_max)


@dataclass(frozen=True)
class NodeVector:
    """Slot indices of an encoded node: syntax type first, then ``k`` tokens."""

    indices: tuple[int, ...]
    n_types: int
    n_tokens: int

    @property
    def k(self) -> int:
        return len(self.indices) - 1

    @property
    def dim(self) -> int:
        return self.n_types + self.k * self.n_tokens

    @property
    def bits(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.uint8)
        out[self.indices[0]] = 1
        for j, idx in enumerate(self.indices[1:]):
            out[self.n_types + j * self.n_tokens + idx] = 1
        return out

    @property
    def is_pad(self) -> bool:
        return self.indices[0] == PAD


def pad_vector(vocab: Vocabulary) -> NodeVector:
    return NodeVector((PAD,) * (1 + vocab.k), vocab.n_types, vocab.n_tokens)


def encode_content(syntax_type: SyntaxType, texts: Sequence[str], vocab: Vocabulary) -> NodeVector:
    if len(texts) > vocab.k:
        raise ValueError(f"{len(texts)} tokens do not fit in {vocab.k} slots")
    slots = [vocab.token_index(t) for t in texts]
    slots += [PAD] * (vocab.k - len(slots))
    return NodeVector((vocab.type_index(syntax_type), *slots), vocab.n_types, vocab.n_tokens)


def encode_node(node: AstNode | None, vocab: Vocabulary) -> NodeVector:
    """Encode ``node``; ``None`` stands for the pad pseudo-node."""
    if node is None:
        return pad_vector(vocab)
    return encode_content(node.syntax_type, [t.text for t in node_content(node)], vocab)


def slot_split(vector: np.ndarray, n_types: int, n_tokens: int, k: int) -> list[np.ndarray]:
    return [vector[:n_types]] + [
        vector[n_types + j * n_tokens : n_types + (j + 1) * n_tokens] for j in range(k)
    ]


def decode_indices(indices: Sequence[int], vocab: Vocabulary) -> tuple[SyntaxType, list[Token]]:
    syntax_type = vocab.syntax_types[indices[0]]
    slots = list(indices[1:])
    while slots and slots[-1] == PAD:
        slots.pop()
    texts = [vocab.tokens[i] for i in slots]
    if syntax_type is SyntaxType.MODULE:
        return syntax_type, [Token(t, SyntaxType.COMMENT) for t in texts]
    return syntax_type, [Token(t, classify(t)) for t in texts]


def argmax_indices(probs: np.ndarray, vocab: Vocabulary) -> tuple[int, ...]:
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (vocab.dim,):
        raise MalformedVector(f"expected a vector of length {vocab.dim}, got shape {probs.shape}")
    # np.argmax returns the first maximum, i.e. ties break toward the lowest index
    return tuple(int(np.argmax(s)) for s in slot_split(probs, vocab.n_types, vocab.n_tokens, vocab.k))


def decode_vector(probs: np.ndarray, vocab: Vocabulary) -> tuple[SyntaxType, list[Token]]:
    """Per-slot argmax decoding with trailing pad tokens stripped."""
    probs = np.asarray(probs, dtype=float)
    indices = argmax_indices(probs, vocab)
    for s in slot_split(probs, vocab.n_types, vocab.n_tokens, vocab.k):
        if abs(s.sum() - 1.0) > 1e-6:
            raise MalformedVector("every slot must sum to one")
    return decode_indices(indices, vocab)


@dataclass(frozen=True)
class SubTreeBatch:
    parent: NodeVector
    children: tuple[NodeVector, ...]
    child_mask: tuple[bool, ...]
    source: str = ""

    @property
    def real_children(self) -> int:
        return sum(self.child_mask)


def subtree_batch(parent: NodeVector, children: Sequence[NodeVector], d_max: int, source: str = "") -> SubTreeBatch:
    if not children:
        raise ValueError("a sub-tree needs at least one child")
    if len(children) > d_max:
        raise DegreeOverflow(-1, len(children), d_max)
    pad = NodeVector((PAD,) * len(parent.indices), parent.n_types, parent.n_tokens)
    padded = tuple(children) + (pad,) * (d_max - len(children))
    mask = (True,) * len(children) + (False,) * (d_max - len(children))
    return SubTreeBatch(parent, padded, mask, source)


def sample_subtrees(ast: ProgramAst, vocab: Vocabulary, name: str = "") -> list[SubTreeBatch]:
    """One training instance per internal node, in pre-order."""
    out = []
    for node in ast.internal_nodes():
        if len(node.children) > vocab.d_max:
            raise DegreeOverflow(node.id, len(node.children), vocab.d_max)
        children = [encode_node(c, vocab) for c in ast.children(node)]
        out.append(subtree_batch(encode_node(node, vocab), children, vocab.d_max, f"{name}#{node.id}"))
    return out
