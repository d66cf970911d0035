"""Inference procedures on a trained model: generation from an intention,
interpretation of code, next-line prediction and completion of fragments.

Decoding is greedy per-slot argmax everywhere, so every procedure is a
deterministic function of the model file and its input.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .encoding import (
    PAD,
    NodeVector,
    argmax_indices,
    decode_indices,
    encode_content,
    encode_node,
    pad_vector,
)
from .grammar import (
    AstNode,
    DegreeOverflow,
    GrammarError,
    ParseError,
    ProgramAst,
    SyntaxType,
    Token,
    comment_words,
    emit_source,
    parse,
    parse_source,
    tokenize,
)
from .network import Model, bottom_up_pass, sequential_pass, top_down_pass

COMPOUND_HEADS = {"def", "class", "for", "while", "if", "elif", "else"}


@dataclass
class GenerationConfig:
    max_depth: int = 12
    # None means the model's d_max
    max_children: int | None = None

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


@dataclass
class SynthesisResult:
    ast: ProgramAst
    depth_exceeded: bool = False
    ambiguous: bool = False
    # generated children dropped because they did not form valid statements
    pruned: int = 0
    root: tuple[int, ...] = ()
    notes: list[str] = field(default_factory=list)

    @property
    def source(self) -> str:
        return emit_source(self.ast)

    @property
    def lines(self) -> list[tuple[int, list[str]]]:
        return self.ast.statement_lines()


def _decode(probs: np.ndarray, model: Model) -> NodeVector:
    v = model.vocab
    return NodeVector(argmax_indices(probs, v), v.n_types, v.n_tokens)


def opens_block(syntax_type: SyntaxType, texts: Sequence[str]) -> bool:
    """Whether a statement-level node owns an indented body."""
    if syntax_type in (SyntaxType.CLASS, SyntaxType.FUNCTION):
        return True
    return bool(texts) and texts[0] in COMPOUND_HEADS and texts[-1] == ":"


def _valid_statement(syntax_type: SyntaxType, texts: Sequence[str]) -> bool:
    if syntax_type not in (SyntaxType.STATEMENT, SyntaxType.FUNCTION, SyntaxType.CLASS) or not texts:
        return False
    try:
        ast = parse(tokenize(" ".join(texts)), allow_empty_blocks=True)
    except GrammarError:
        # a lone elif/else is rejected without its if; check the header itself
        if texts[0] in ("elif", "else"):
            try:
                parse(tokenize("if x :\n\tpass\n" + " ".join(texts)), allow_empty_blocks=True)
                return True
            except GrammarError:
                return False
        return False
    return len(ast.root_node.children) == 1


class _TreeBuilder:
    def __init__(self):
        self.nodes: dict[int, AstNode] = {}

    def add(self, syntax_type, tokens=(), intention=(), parent=None) -> AstNode:
        node = AstNode(len(self.nodes), syntax_type, list(tokens), list(intention), parent=parent)
        self.nodes[node.id] = node
        if parent is not None:
            self.nodes[parent].children.append(node.id)
        return node

    def prune(self) -> int:
        """Drop bodiless compound headers and orphan elif/else, until stable."""
        dropped = 0
        changed = True
        while changed:
            changed = False
            for node in list(self.nodes.values()):
                if node.id not in self.nodes:
                    continue
                keep, prev = [], None
                for cid in node.children:
                    child = self.nodes[cid]
                    head = child.texts[0] if child.tokens else ""
                    bad = opens_block(child.syntax_type, child.texts) and not child.children
                    if head == "elif":
                        bad = bad or prev not in ("if", "elif")
                    elif head == "else":
                        bad = bad or prev not in ("if", "elif", "for", "while")
                    if bad:
                        self._remove(cid)
                        dropped += 1
                        changed = True
                        continue
                    keep.append(cid)
                    prev = head
                node.children = keep
        return dropped

    def _remove(self, node_id: int):
        for cid in self.nodes[node_id].children:
            self._remove(cid)
        del self.nodes[node_id]

    def finish(self, root: int) -> ProgramAst:
        # renumber in pre-order so ids are dense and deterministic
        order: list[int] = []

        def visit(nid):
            order.append(nid)
            for c in self.nodes[nid].children:
                visit(c)

        visit(root)
        remap = {old: new for new, old in enumerate(order)}
        nodes = {}
        for old in order:
            n = self.nodes[old]
            nodes[remap[old]] = AstNode(
                remap[old],
                n.syntax_type,
                n.tokens,
                n.intention,
                [remap[c] for c in n.children],
                None if n.parent is None else remap[n.parent],
            )
        return ProgramAst(nodes, 0)


def sibling_list(parent: NodeVector, model: Model, limit: int | None = None) -> list[NodeVector]:
    """Children of ``parent`` decoded top-down, cut where the block ends.

    The down head is never trained on pad positions, so the end of a block
    is read from the sequential right head instead: the list stops after the
    first child whose predicted right neighbour is pad.
    """
    kids = []
    for probs in top_down_pass(parent, model.params)[: limit or model.vocab.d_max]:
        child = _decode(probs, model)
        if child.is_pad:
            break
        kids.append(child)
    if not kids:
        return kids
    for i, (_, right) in enumerate(sequential_pass(kids, model.params)):
        if _decode(right, model).is_pad:
            return kids[: i + 1]
    return kids


def _generate_from(root: NodeVector, model: Model, config: GenerationConfig) -> SynthesisResult:
    vocab = model.vocab
    limit = config.max_children or vocab.d_max
    root_type, intention = decode_indices(root.indices, vocab)
    build = _TreeBuilder()
    root_node = build.add(SyntaxType.MODULE, intention=intention)
    result = SynthesisResult(ProgramAst({}, 0), root=root.indices)

    def expand(parent_vec: NodeVector, parent_id: int, depth: int):
        for child in sibling_list(parent_vec, model, limit):
            syntax_type, tokens = decode_indices(child.indices, vocab)
            texts = [t.text for t in tokens]
            if not _valid_statement(syntax_type, texts):
                result.pruned += 1
                continue
            node = build.add(syntax_type, tokens, parent=parent_id)
            if opens_block(syntax_type, texts):
                if depth >= config.max_depth:
                    result.depth_exceeded = True
                else:
                    expand(child, node.id, depth + 1)

    expand(root, root_node.id, 1)
    result.pruned += build.prune()
    result.ast = build.finish(root_node.id)
    try:
        parse(tokenize(result.source))
    except GrammarError as exc:  # pragma: no cover - prune() should prevent this
        result.notes.append(f"generated source does not parse: {exc}")
    return result


def generate_program(intention: str, model: Model, config: GenerationConfig | None = None) -> SynthesisResult:
    """Expand a program top-down from the comment ``intention``."""
    words = comment_words(intention)[: model.vocab.k]
    root = encode_content(SyntaxType.MODULE, words, model.vocab)
    return _generate_from(root, model, config or GenerationConfig())


def _node_vector(ast: ProgramAst, node: AstNode, predicted: dict[int, NodeVector], model: Model) -> NodeVector:
    return predicted.get(node.id) or encode_node(node, model.vocab)


def interpret_program(ast: ProgramAst, model: Model) -> list[str]:
    """Infer the intention words of a (possibly partial) truncated tree.

    Parents are predicted bottom-up level by level; each predicted parent
    replaces the parsed one as input to the level above.
    """
    vocab = model.vocab
    predicted: dict[int, NodeVector] = {}
    order = [n for _, n in ast.walk() if n.children]
    for node in reversed(order):
        if len(node.children) > vocab.d_max:
            raise DegreeOverflow(node.id, len(node.children), vocab.d_max)
        kids = [_node_vector(ast, c, predicted, model) for c in ast.children(node)]
        kids += [pad_vector(vocab)] * (vocab.d_max - len(kids))
        predicted[node.id] = _decode(bottom_up_pass(kids, model.params), model)
    if ast.root not in predicted:
        return []
    _, tokens = decode_indices(predicted[ast.root].indices, vocab)
    return [t.text for t in tokens]


def _single_statement(line: str) -> AstNode:
    ast = parse_source(line, allow_empty_blocks=True)
    top = ast.children(ast.root_node)
    if len(top) != 1:
        raise ParseError(1, f"expected exactly one statement, found {len(top)}")
    return top[0]


def next_line_vector(node: NodeVector, model: Model) -> NodeVector:
    right = sequential_pass([node], model.params)[0][1]
    return _decode(right, model)


def next_line(line: str, model: Model) -> list[str]:
    """Tokens of the statement predicted to follow ``line``; ``[]`` means end of block."""
    node = encode_node(_single_statement(line), model.vocab)
    pred = next_line_vector(node, model)
    if pred.is_pad:
        return []
    return [t.text for t in decode_indices(pred.indices, model.vocab)[1]]


def extend_chain(chain: list[NodeVector], model: Model) -> list[NodeVector]:
    """Grow a sibling chain leftward, then rightward, until pad or ``d_max``.

    The left head is never trained on a block's first child, so a leftward
    candidate is kept only if, placed first, its right head reproduces the
    current first element.
    """
    d_max = model.vocab.d_max
    chain = list(chain)
    while len(chain) < d_max:
        cand = _decode(sequential_pass(chain, model.params)[0][0], model)
        if cand.is_pad:
            break
        trial = [cand] + chain
        back = _decode(sequential_pass(trial, model.params)[0][1], model)
        if back != chain[0]:
            break
        chain = trial
    while len(chain) < d_max:
        cand = _decode(sequential_pass(chain, model.params)[-1][1], model)
        if cand.is_pad:
            break
        chain.append(cand)
    return chain


def is_ambiguous(ast: ProgramAst, model: Model) -> bool:
    return any(tuple(texts) in model.repeated_lines for _, texts in ast.statement_lines())


def complete_program(fragment: str, model: Model, config: GenerationConfig | None = None) -> SynthesisResult:
    """Rebuild a whole program around a code fragment.

    The fragment's top-level statements are extended into a full sibling
    chain, their father is inferred bottom-up, and the process repeats on
    the father until a module node appears; the program is then regenerated
    top-down from that root.
    """
    config = config or GenerationConfig()
    vocab = model.vocab
    ast = parse_source(fragment, allow_empty_blocks=True)
    top = ast.children(ast.root_node)
    if not top:
        raise ParseError(1, "fragment contains no statement")
    if len(top) > vocab.d_max:
        raise DegreeOverflow(ast.root, len(top), vocab.d_max)
    chain = [encode_node(n, vocab) for n in top]
    root = None
    exceeded = False
    for _ in range(config.max_depth):
        chain = extend_chain(chain, model)
        padded = chain + [pad_vector(vocab)] * (vocab.d_max - len(chain))
        father = _decode(bottom_up_pass(padded, model.params), model)
        if vocab.syntax_types[father.indices[0]] is SyntaxType.MODULE:
            root = father
            break
        if father.is_pad:
            break
        chain = [father]
    else:
        exceeded = True
    if root is None:
        root = encode_content(SyntaxType.MODULE, [], vocab)
    result = _generate_from(root, model, config)
    result.depth_exceeded = result.depth_exceeded or exceeded
    result.ambiguous = is_ambiguous(ast, model)
    return result
