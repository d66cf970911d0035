import numpy as np
import pytest

from hsusynth.encoding import build_vocabulary, encode_content
from hsusynth.grammar import GrammarError, ParseError, SyntaxType, emit_source, parse_source, tokenize, parse
from hsusynth.network import Model, TrainConfig, dims_for, train
from hsusynth.tasks import (
    GenerationConfig,
    complete_program,
    extend_chain,
    generate_program,
    interpret_program,
    next_line,
    opens_block,
    _TreeBuilder,
)
from hsusynth.units import HsuParameters


def comment(ast):
    return " ".join(t.text for t in ast.root_node.intention)


@pytest.fixture(scope="module")
def untrained(corpus):
    vocab = build_vocabulary([a for _, a in corpus])
    return Model(HsuParameters.init(dims_for(vocab, 8), seed=3), vocab, TrainConfig(d_h=8))


def test_generation_config_validation():
    with pytest.raises(ValueError):
        GenerationConfig(max_depth=0)


def test_opens_block():
    assert opens_block(SyntaxType.STATEMENT, ["if", "x", ":"])
    assert opens_block(SyntaxType.FUNCTION, ["def", "f", "(", ")", ":"])
    assert not opens_block(SyntaxType.STATEMENT, ["x", "=", "1"])


def test_prune_drops_bodiless_headers_and_orphan_else():
    build = _TreeBuilder()
    root = build.add(SyntaxType.MODULE)
    build.add(SyntaxType.STATEMENT, tokens=tokenize("else :")[0].tokens, parent=root.id)
    loop = build.add(SyntaxType.STATEMENT, tokens=tokenize("while x :")[0].tokens, parent=root.id)
    inner = build.add(SyntaxType.STATEMENT, tokens=tokenize("if y :")[0].tokens, parent=loop.id)
    build.add(SyntaxType.STATEMENT, tokens=tokenize("z = 1")[0].tokens, parent=root.id)
    # the bodiless if empties the while, which must then go too
    assert build.prune() == 3
    assert emit_source(build.finish(root.id)) == "z = 1\n"
    assert inner.id not in build.nodes


# -- untrained model: contracts that hold regardless of quality

def test_generation_is_deterministic_and_parses(untrained):
    for intention in ("", "binary search", "unknown words only"):
        a = generate_program(intention, untrained)
        b = generate_program(intention, untrained)
        assert a.source == b.source
        parse(tokenize(a.source))
        assert not a.notes


def test_depth_limit_flags_partial_output(corpus):
    vocab = build_vocabulary([a for _, a in corpus])
    params = HsuParameters.init(dims_for(vocab, 4), zero_heads=True)
    # the down head always proposes the same compound header, so it nests forever
    header = encode_content(SyntaxType.STATEMENT, ["if", "low", "<", "high", ":"], vocab)
    params.arrays["b_down"] = header.bits * 50.0
    params.arrays["b_right"] = np.zeros(vocab.dim)
    model = Model(params, vocab, TrainConfig(d_h=4))
    result = generate_program("loop", model, GenerationConfig(max_depth=3))
    assert result.depth_exceeded
    parse(tokenize(result.source))


def test_interpretation_of_single_statement_is_deterministic(untrained):
    ast = parse_source("x = 1\n")
    assert interpret_program(ast, untrained) == interpret_program(ast, untrained)


def test_interpretation_of_empty_program(untrained):
    assert interpret_program(parse_source(""), untrained) == []


def test_next_line_rejects_unparseable_input(untrained):
    with pytest.raises(GrammarError):
        next_line("x = = 1", untrained)
    with pytest.raises(ParseError):
        next_line("x = 1\ny = 2", untrained)


def test_complete_rejects_empty_fragment(untrained):
    with pytest.raises(ParseError):
        complete_program("", untrained)


def test_extend_chain_respects_d_max(untrained, corpus):
    vocab = untrained.vocab
    start = [encode_content(SyntaxType.STATEMENT, ["x", "=", "1"], vocab)]
    assert 1 <= len(extend_chain(start, untrained)) <= vocab.d_max


def test_ambiguous_fragment_is_flagged():
    sources = [
        "# first\nx = 1\ny = 2\n",
        "# second\nx = 1\nz = 3\n",
    ]
    model = train([parse_source(s) for s in sources], TrainConfig(epochs=2, d_h=4))
    assert ("x", "=", "1") in model.repeated_lines
    assert complete_program("x = 1", model).ambiguous
    assert not complete_program("y = 2", model).ambiguous


# -- trained model over the bundled corpus

def test_generation_regenerates_each_program(trained):
    exact = 0
    for _, ast in trained.corpus:
        result = generate_program(comment(ast), trained.model)
        parse(tokenize(result.source))
        exact += result.lines == ast.statement_lines()
    assert exact >= 8


def test_binary_search_regenerates_exactly(trained):
    ast = dict(trained.corpus)["binary_search"]
    assert generate_program(comment(ast), trained.model).source == emit_source(ast)


def test_quick_sort_interpretation(trained):
    ast = dict(trained.corpus)["quick_sort"]
    assert interpret_program(ast, trained.model) == [t.text for t in ast.root_node.intention]


def test_next_line_on_memorized_lines(trained):
    ast = dict(trained.corpus)["factorial"]
    body = ast.children(ast.children(ast.root_node)[0])
    assert next_line(" ".join(body[0].texts), trained.model) == body[1].texts
    assert next_line(" ".join(body[-1].texts), trained.model) == []


def test_full_program_completion_is_a_fixed_point(trained):
    for name, ast in trained.corpus:
        assert complete_program(emit_source(ast), trained.model).lines == ast.statement_lines(), name


def test_inference_is_deterministic(trained):
    ast = dict(trained.corpus)["gcd"]
    line = " ".join(ast.statement_lines()[1][1])
    assert complete_program(line, trained.model).source == complete_program(line, trained.model).source
    assert interpret_program(ast, trained.model) == interpret_program(ast, trained.model)
