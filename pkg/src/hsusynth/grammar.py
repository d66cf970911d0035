"""Tokenizer, parser and statement-level tree utilities for ``.alg`` programs.

The accepted language is a small indentation-based subset of Python:
imports, assignments (plain, chained, augmented, tuple), ``return``,
call statements, ``pass``/``break``/``continue`` and the compound forms
``def``, ``class``, ``for``, ``while``, ``if``/``elif``/``else``.

``parse`` builds a full tree down to single tokens.  Compound statements
own a ``condition`` child (the header line) and a ``body`` child, and
expressions nest.  ``truncate`` collapses that tree so every node is a
statement-level component holding its source tokens in order.
"""
from __future__ import annotations

import copy
import enum
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence


class SyntaxType(enum.Enum):
    PAD = "pad"
    MODULE = "module"
    CLASS = "class"
    FUNCTION = "function"
    STATEMENT = "statement"
    EXPRESSION = "expression"
    KEYWORD = "keyword-token"
    IDENTIFIER = "identifier-token"
    OPERATOR = "operator-token"
    LITERAL = "literal-token"
    COMMENT = "comment-token"


TOKEN_TYPES = frozenset(
    {
        SyntaxType.KEYWORD,
        SyntaxType.IDENTIFIER,
        SyntaxType.OPERATOR,
        SyntaxType.LITERAL,
        SyntaxType.COMMENT,
    }
)
STATEMENT_LEVEL = frozenset(
    {SyntaxType.MODULE, SyntaxType.CLASS, SyntaxType.FUNCTION, SyntaxType.STATEMENT}
)

KEYWORDS = frozenset(
    "and as break class continue def elif else False for from if import in is "
    "None not or pass return True while".split()
)

# longest first so the alternation prefers multi-character operators
OPERATORS = sorted(
    "**= //= >>= <<= == != <= >= += -= *= /= %= // ** -> << >> "
    "+ - * / % = < > ( ) [ ] { } , : . & | ^ ~".split(),
    key=len,
    reverse=True,
)

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t]+)"
    r"|(?P<comment>\#.*)"
    r"|(?P<string>'[^'\n]*'|\"[^\"\n]*\")"
    r"|(?P<quote>['\"])"
    r"|(?P<number>\d+(?:\.\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>" + "|".join(re.escape(op) for op in OPERATORS) + ")"
)


class GrammarError(Exception):
    """Base class for tokenizer and parser failures; carries a line number."""

    def __init__(self, line: int | None, message: str):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class UnterminatedString(GrammarError):
    pass


class MixedIndent(GrammarError):
    pass


class ParseError(GrammarError):
    """A line that does not belong to the accepted statement grammar."""


class IndentError(ParseError):
    pass


class TruncationOverflow(GrammarError):
    def __init__(self, node_id: int, count: int, limit: int):
        self.node_id = node_id
        super().__init__(None, f"node {node_id} holds {count} tokens, limit is {limit}")


class DegreeOverflow(GrammarError):
    def __init__(self, node_id: int, degree: int, limit: int):
        self.node_id = node_id
        super().__init__(None, f"node {node_id} has {degree} children, limit is {limit}")


@dataclass(frozen=True)
class Token:
    text: str
    kind: SyntaxType

    def __str__(self) -> str:
        return self.text


def classify(text: str) -> SyntaxType:
    """Token kind of a bare token text, as the tokenizer would assign it."""
    if text in KEYWORDS:
        return SyntaxType.KEYWORD
    if text[0] in "'\"" or text[0].isdigit():
        return SyntaxType.LITERAL
    if text[0].isalpha() or text[0] == "_":
        return SyntaxType.IDENTIFIER
    return SyntaxType.OPERATOR


@dataclass
class Line:
    number: int
    indent: int
    tokens: list[Token]
    comment: bool = False

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]


def _split_line(text: str, number: int) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(number, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind == "comment":
            break
        if kind == "quote":
            raise UnterminatedString(number, "string literal is not closed")
        if kind == "string" or kind == "number":
            tokens.append(Token(m.group(), SyntaxType.LITERAL))
        elif kind == "name":
            tokens.append(Token(m.group(), classify(m.group())))
        elif kind == "op":
            tokens.append(Token(m.group(), SyntaxType.OPERATOR))
        pos = m.end()
    return tokens


def tokenize(source: str) -> list[Line]:
    """Split ``source`` into non-blank lines with indentation width and tokens.

    Comment lines become ``comment=True`` lines of whitespace-separated
    comment tokens.  Trailing comments on code lines are dropped.
    """
    lines: list[Line] = []
    indent_char = None
    for number, raw in enumerate(source.splitlines(), start=1):
        stripped = raw.lstrip(" \t")
        if not stripped.strip():
            continue
        lead = raw[: len(raw) - len(stripped)]
        if lead:
            chars = set(lead)
            if len(chars) > 1 or (indent_char is not None and chars != {indent_char}):
                raise MixedIndent(number, "tabs and spaces mixed in indentation")
            indent_char = lead[0]
        if stripped.startswith("#"):
            words = stripped.lstrip("#").split()
            lines.append(
                Line(number, len(lead), [Token(w, SyntaxType.COMMENT) for w in words], True)
            )
            continue
        tokens = _split_line(stripped, number)
        if tokens:
            lines.append(Line(number, len(lead), tokens))
    return lines


@dataclass
class AstNode:
    id: int
    syntax_type: SyntaxType
    tokens: list[Token] = field(default_factory=list)
    intention: list[Token] = field(default_factory=list)
    children: list[int] = field(default_factory=list)
    parent: int | None = None
    # construct label: "for", "condition", "body", "call", "subscript", ...
    role: str | None = None

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]


@dataclass
class ProgramAst:
    nodes: dict[int, AstNode]
    root: int

    def __getitem__(self, node_id: int) -> AstNode:
        return self.nodes[node_id]

    @property
    def root_node(self) -> AstNode:
        return self.nodes[self.root]

    def children(self, node: AstNode | int) -> list[AstNode]:
        if isinstance(node, int):
            node = self.nodes[node]
        return [self.nodes[c] for c in node.children]

    def walk(self, start: int | None = None, depth: int = 0) -> Iterator[tuple[int, AstNode]]:
        """Pre-order traversal yielding ``(depth, node)``; the root has depth 0."""
        node = self.nodes[self.root if start is None else start]
        yield depth, node
        for child in node.children:
            yield from self.walk(child, depth + 1)

    def internal_nodes(self) -> list[AstNode]:
        return [n for _, n in self.walk() if n.children]

    def statement_lines(self) -> list[tuple[int, list[str]]]:
        """Source lines of a truncated tree as ``(nesting depth, token texts)``."""
        return [(d - 1, n.texts) for d, n in self.walk() if d > 0]

    def shape(self, node_id: int | None = None):
        """Id-free nested description used for structural comparison."""
        node = self.nodes[self.root if node_id is None else node_id]
        return (
            node.syntax_type.value,
            node.role,
            tuple((t.text, t.kind.value) for t in node.tokens),
            tuple(t.text for t in node.intention),
            tuple(self.shape(c) for c in node.children),
        )

    def check(self) -> None:
        """Assert the single-root, consistent parent/child link invariants."""
        seen = set()
        for _, node in self.walk():
            assert node.id not in seen, "cycle or shared node"
            seen.add(node.id)
            for child in self.children(node):
                assert child.parent == node.id
        assert seen == set(self.nodes), "unreachable nodes"
        assert self.root_node.parent is None
        assert self.root_node.syntax_type is SyntaxType.MODULE


class _Builder:
    def __init__(self):
        self.nodes: dict[int, AstNode] = {}

    def node(self, syntax_type, children=(), tokens=(), role=None) -> AstNode:
        node = AstNode(len(self.nodes), syntax_type, list(tokens), role=role)
        self.nodes[node.id] = node
        for child in children:
            child.parent = node.id
            node.children.append(child.id)
        return node

    def token(self, tok: Token) -> AstNode:
        return self.node(tok.kind, tokens=[tok], role="token")

    def expr(self, role, children) -> AstNode:
        return self.node(SyntaxType.EXPRESSION, children, role=role)


_COMPARE = {"==", "!=", "<", ">", "<=", ">=", "in", "is"}
_ARITH = [{"|"}, {"^"}, {"&"}, {"<<", ">>"}, {"+", "-"}, {"*", "/", "//", "%"}]
_AUGMENTED = {"+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<="}
_COMPOUND = {"def", "class", "for", "while", "if", "elif", "else"}


class _StatementParser:
    """Recursive descent over the tokens of a single logical line."""

    def __init__(self, line: Line, build: _Builder):
        self.toks = line.tokens
        self.number = line.number
        self.pos = 0
        self.b = build

    # -- token helpers
    def peek(self, offset: int = 0) -> str | None:
        i = self.pos + offset
        return self.toks[i].text if i < len(self.toks) else None

    def error(self, message: str):
        return ParseError(self.number, message)

    def take(self, text: str | None = None) -> AstNode:
        if self.pos >= len(self.toks):
            raise self.error(f"expected {text or 'a token'} at end of line")
        tok = self.toks[self.pos]
        if text is not None and tok.text != text:
            raise self.error(f"expected {text!r}, found {tok.text!r}")
        self.pos += 1
        return self.b.token(tok)

    def take_name(self) -> AstNode:
        tok = self.toks[self.pos] if self.pos < len(self.toks) else None
        if tok is None or tok.kind is not SyntaxType.IDENTIFIER:
            raise self.error("expected an identifier")
        return self.take()

    def at_end(self) -> bool:
        return self.pos >= len(self.toks)

    def finish(self):
        if not self.at_end():
            raise self.error(f"unexpected token {self.peek()!r}")

    # -- statements
    def statement(self) -> tuple[AstNode, bool]:
        """Return the parsed node and whether it opens an indented block."""
        head = self.peek()
        if head in _COMPOUND:
            return self.compound_header(head), True
        if head in ("import", "from"):
            parts = self.import_stmt()
            role = "import"
        elif head == "return":
            parts = [self.take()]
            if not self.at_end():
                parts.append(self.expr_list())
            role = "return"
        elif head in ("pass", "break", "continue"):
            parts = [self.take()]
            role = head
        else:
            parts, role = self.expression_statement()
        self.finish()
        return self.b.node(SyntaxType.STATEMENT, parts, role=role), False

    def import_stmt(self) -> list[AstNode]:
        parts = []
        if self.peek() == "from":
            parts += [self.take(), *self.dotted(), self.take("import")]
            parts.append(self.take_name())
            while self.peek() == ",":
                parts += [self.take(), self.take_name()]
            return parts
        parts.append(self.take("import"))
        while True:
            parts += self.dotted()
            if self.peek() == "as":
                parts += [self.take(), self.take_name()]
            if self.peek() != ",":
                return parts
            parts.append(self.take())

    def dotted(self) -> list[AstNode]:
        parts = [self.take_name()]
        while self.peek() == ".":
            parts += [self.take(), self.take_name()]
        return parts

    def expression_statement(self) -> tuple[list[AstNode], str]:
        first = self.expr_list()
        if self.peek() in _AUGMENTED:
            self.require_target(first, single=True)
            return [first, self.take(), self.expr()], "augmented-assign"
        if self.peek() == "=":
            parts = [first]
            while self.peek() == "=":
                self.require_target(parts[-1])
                parts += [self.take(), self.expr_list()]
            return parts, "assign"
        if first.role != "call":
            raise self.error("expression statement must be a call")
        return [first], "call"

    def require_target(self, node: AstNode, single: bool = False):
        if node.role == "tuple" and not single:
            for child in self.b.nodes[node.id].children:
                child_node = self.b.nodes[child]
                if child_node.role != "token" or child_node.texts != [","]:
                    self.require_target(child_node, single=True)
            return
        ok = node.role in ("subscript", "attribute") or (
            node.role == "token" and node.syntax_type is SyntaxType.IDENTIFIER
        )
        if not ok:
            raise self.error("cannot assign to this expression")

    def compound_header(self, head: str) -> AstNode:
        parts = [self.take()]
        syntax_type = SyntaxType.STATEMENT
        if head == "def":
            syntax_type = SyntaxType.FUNCTION
            parts += [self.take_name(), self.take("(")]
            if self.peek() != ")":
                parts += self.params()
            parts.append(self.take(")"))
        elif head == "class":
            syntax_type = SyntaxType.CLASS
            parts.append(self.take_name())
            if self.peek() == "(":
                parts.append(self.take())
                if self.peek() != ")":
                    parts.append(self.expr_list())
                parts.append(self.take(")"))
        elif head == "for":
            target = self.expr_list(stop_at_in=True)
            self.require_target(target)
            parts += [target, self.take("in"), self.expr_list()]
        elif head in ("while", "if", "elif"):
            parts.append(self.expr())
        parts.append(self.take(":"))
        self.finish()
        condition = self.b.node(SyntaxType.STATEMENT, parts, role="condition")
        return self.b.node(syntax_type, [condition], role=head)

    def params(self) -> list[AstNode]:
        parts = []
        while True:
            parts.append(self.take_name())
            if self.peek() == "=":
                parts += [self.take(), self.expr()]
            if self.peek() != ",":
                return parts
            parts.append(self.take())

    # -- expressions
    def expr_list(self, stop_at_in: bool = False) -> AstNode:
        first = self.expr(no_in=stop_at_in)
        if self.peek() != ",":
            return first
        items = [first]
        while self.peek() == ",":
            items.append(self.take())
            if self.at_end() or self.peek() in ("=", ")", ":", "in"):
                break
            items.append(self.expr(no_in=stop_at_in))
        return self.b.expr("tuple", items)

    def expr(self, no_in: bool = False) -> AstNode:
        return self.or_expr(no_in)

    def _boolean(self, word, inner, no_in):
        left = inner(no_in)
        while self.peek() == word:
            left = self.b.expr("boolop", [left, self.take(), inner(no_in)])
        return left

    def or_expr(self, no_in):
        return self._boolean("or", self.and_expr, no_in)

    def and_expr(self, no_in):
        return self._boolean("and", self.not_expr, no_in)

    def not_expr(self, no_in):
        if self.peek() == "not":
            return self.b.expr("unary", [self.take(), self.not_expr(no_in)])
        return self.comparison(no_in)

    def comparison(self, no_in):
        left = self.arith(0)
        while True:
            op = self.peek()
            if op == "not" and self.peek(1) == "in":
                ops = [self.take(), self.take()]
            elif op == "is" and self.peek(1) == "not":
                ops = [self.take(), self.take()]
            elif op in _COMPARE and not (no_in and op == "in"):
                ops = [self.take()]
            else:
                return left
            left = self.b.expr("compare", [left, *ops, self.arith(0)])

    def arith(self, level):
        if level == len(_ARITH):
            return self.unary()
        left = self.arith(level + 1)
        while self.peek() in _ARITH[level]:
            left = self.b.expr("binop", [left, self.take(), self.arith(level + 1)])
        return left

    def unary(self):
        if self.peek() in ("-", "+", "~"):
            return self.b.expr("unary", [self.take(), self.unary()])
        return self.power()

    def power(self):
        base = self.postfix()
        if self.peek() == "**":
            return self.b.expr("binop", [base, self.take(), self.unary()])
        return base

    def postfix(self):
        node = self.atom()
        while True:
            nxt = self.peek()
            if nxt == "(":
                node = self.b.expr("call", [node, *self.call_args()])
            elif nxt == "[":
                parts = [node, self.take()]
                parts += self.subscript()
                parts.append(self.take("]"))
                node = self.b.expr("subscript", parts)
            elif nxt == ".":
                node = self.b.expr("attribute", [node, self.take(), self.take_name()])
            else:
                return node

    def call_args(self) -> list[AstNode]:
        parts = [self.take("(")]
        while self.peek() != ")":
            if self.peek(1) == "=" and self.peek() is not None and classify(self.peek()) is SyntaxType.IDENTIFIER:
                parts += [self.take(), self.take()]
            parts.append(self.expr())
            if self.peek() != ",":
                break
            parts.append(self.take())
        parts.append(self.take(")"))
        return parts

    def subscript(self) -> list[AstNode]:
        parts = []
        if self.peek() != ":":
            parts.append(self.expr())
        if self.peek() == ":":
            parts.append(self.take())
            if self.peek() != "]":
                parts.append(self.expr())
        if not parts:
            raise self.error("empty subscript")
        return parts

    def atom(self) -> AstNode:
        text = self.peek()
        if text is None:
            raise self.error("expression expected at end of line")
        tok = self.toks[self.pos]
        if tok.kind in (SyntaxType.IDENTIFIER, SyntaxType.LITERAL) or text in ("True", "False", "None"):
            return self.take()
        if text == "(":
            parts = [self.take()]
            if self.peek() != ")":
                parts.append(self.expr_list())
            parts.append(self.take(")"))
            return self.b.expr("paren", parts)
        if text in ("[", "{"):
            close = "]" if text == "[" else "}"
            parts = [self.take()]
            while self.peek() != close:
                parts.append(self.expr())
                if text == "{":
                    parts += [self.take(":"), self.expr()]
                if self.peek() != ",":
                    break
                parts.append(self.take())
            parts.append(self.take(close))
            return self.b.expr("list" if text == "[" else "dict", parts)
        raise self.error(f"unexpected token {text!r}")


def parse(lines: Sequence[Line], allow_empty_blocks: bool = False) -> ProgramAst:
    """Build the full program tree from tokenized lines.

    Comment lines are ignored.  With ``allow_empty_blocks`` a compound header
    may end the input without a body, which is how single-line fragments
    such as ``while x > 0:`` are accepted.
    """
    build = _Builder()
    code = [line for line in lines if not line.comment]
    pos = 0

    def block(indent: int) -> list[AstNode]:
        nonlocal pos
        stmts: list[AstNode] = []
        while pos < len(code):
            line = code[pos]
            if line.indent < indent:
                break
            if line.indent > indent:
                raise IndentError(line.number, "unexpected indent")
            node, opens = _StatementParser(line, build).statement()
            pos += 1
            head = line.tokens[0].text
            if head in ("elif", "else"):
                prev = stmts[-1].role if stmts else None
                allowed = ("if", "elif") if head == "elif" else ("if", "elif", "for", "while")
                if prev not in allowed:
                    raise ParseError(line.number, f"'{head}' without a matching header")
            if opens:
                body: list[AstNode] = []
                if pos < len(code) and code[pos].indent > indent:
                    body = block(code[pos].indent)
                elif not allow_empty_blocks:
                    raise IndentError(line.number, "expected an indented block")
                body_node = build.node(SyntaxType.STATEMENT, body, role="body")
                body_node.parent = node.id
                node.children.append(body_node.id)
            stmts.append(node)
        return stmts

    top = code[0].indent if code else 0
    stmts = block(top)
    if pos < len(code):
        raise IndentError(code[pos].number, "dedent to an unknown indentation level")
    root = build.node(SyntaxType.MODULE, stmts, role="module")
    return ProgramAst(build.nodes, root.id)


def _flatten_tokens(ast: ProgramAst, node: AstNode) -> list[Token]:
    if node.syntax_type in TOKEN_TYPES:
        return list(node.tokens)
    out = list(node.tokens)
    for child in ast.children(node):
        out += _flatten_tokens(ast, child)
    return out


def truncate(ast: ProgramAst, k: int | None = None) -> ProgramAst:
    """Collapse ``ast`` to statement granularity.

    Expression and token nodes fold into the token list of the statement
    that owns them; a compound statement takes its header tokens and adopts
    the statements of its body as direct children.  Raises
    ``TruncationOverflow`` when a node ends up with more than ``k`` tokens.
    """
    build = _Builder()

    def visit(node: AstNode) -> AstNode:
        kids = ast.children(node)
        roles = [c.role for c in kids]
        if "condition" in roles:
            tokens = _flatten_tokens(ast, kids[roles.index("condition")])
            stmt_children = []
            for c in kids:
                if c.role == "body":
                    stmt_children += ast.children(c)
        else:
            stmt_children = [c for c in kids if c.syntax_type in STATEMENT_LEVEL]
            tokens = list(node.tokens)
            for c in kids:
                if c.syntax_type not in STATEMENT_LEVEL:
                    tokens += _flatten_tokens(ast, c)
        new_children = [visit(c) for c in stmt_children]
        role = None if node.role in ("token", "condition", "body") else node.role
        out = build.node(node.syntax_type, new_children, tokens, role=role)
        out.intention = list(node.intention)
        if k is not None and len(out.tokens) > k:
            raise TruncationOverflow(out.id, len(out.tokens), k)
        return out

    root = visit(ast.root_node)
    return ProgramAst(build.nodes, root.id)


def comment_words(comment: str) -> list[str]:
    words = []
    for line in comment.splitlines():
        words += line.strip().lstrip("#").lower().split()
    return words


def attach_intention(ast: ProgramAst, comment: str, k: int | None = None) -> ProgramAst:
    """Return a copy of ``ast`` whose root intention is the comment's words.

    Words are whitespace separated and lower-cased; at most ``k`` are kept.
    """
    words = comment_words(comment)
    if k is not None:
        words = words[:k]
    out = copy.deepcopy(ast)
    out.root_node.intention = [Token(w, SyntaxType.COMMENT) for w in words]
    return out


def leading_comment(source: str) -> str:
    """The maximal run of ``#`` lines at the top of ``source`` (blank lines skipped)."""
    block = []
    for raw in source.splitlines():
        stripped = raw.strip()
        if not stripped:
            continue
        if not stripped.startswith("#"):
            break
        block.append(stripped)
    return "\n".join(block)


def emit_source(ast: ProgramAst, with_intention: bool = False) -> str:
    """Render a truncated tree as source: one line per node, tab indentation."""
    out = []
    if with_intention and ast.root_node.intention:
        out.append("# " + " ".join(t.text for t in ast.root_node.intention))
    for depth, texts in ast.statement_lines():
        out.append("\t" * depth + " ".join(texts))
    return "\n".join(out) + "\n" if out else ""


def parse_source(source: str, allow_empty_blocks: bool = False) -> ProgramAst:
    """tokenize → parse → truncate, with the leading comment attached as intention."""
    lines = tokenize(source)
    ast = truncate(parse(lines, allow_empty_blocks=allow_empty_blocks))
    return attach_intention(ast, leading_comment(source))


def format_tree(ast: ProgramAst) -> str:
    """Indented text dump of a tree, one node per line."""
    out = []
    for depth, node in ast.walk():
        label = node.syntax_type.value
        if node.role and node.role != "token":
            label += f"[{node.role}]"
        body = " ".join(node.texts)
        if node.intention:
            body = "# " + " ".join(t.text for t in node.intention)
        out.append(("  " * depth + f"{label}: {body}").rstrip())
    return "\n".join(out) + "\n"


def load_corpus(directory) -> list[tuple[str, ProgramAst]]:
    """Parse every ``*.alg`` file of ``directory`` (sorted by name)."""
    from pathlib import Path

    paths = sorted(Path(directory).glob("*.alg"))
    return [(p.stem, parse_source(p.read_text(encoding="utf-8"))) for p in paths]
