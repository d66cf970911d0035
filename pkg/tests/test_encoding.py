import numpy as np
import pytest
from hypothesis import given, strategies as st

from hsusynth import BUNDLED_CORPUS
from hsusynth.encoding import (
    PAD,
    PAD_TOKEN,
    UNK,
    UNK_TOKEN,
    EmptyCorpus,
    MalformedVector,
    NodeVector,
    Vocabulary,
    build_vocabulary,
    decode_vector,
    encode_content,
    encode_node,
    node_content,
    pad_vector,
    slot_split,
)
from hsusynth.grammar import SyntaxType, comment_words, load_corpus, parse_source, tokenize

CORPUS = load_corpus(BUNDLED_CORPUS)
VOCAB = build_vocabulary([a for _, a in CORPUS])


def test_single_program_vocabulary():
    vocab = build_vocabulary([parse_source("# assign\nx = 1\n")])
    assert {"x", "=", "1", "assign"} <= set(vocab.tokens)
    assert vocab.tokens[:2] == (PAD_TOKEN, UNK_TOKEN)
    assert vocab.syntax_types[0] is SyntaxType.PAD
    assert (vocab.k, vocab.d_max) == (3, 1)


def test_shared_tokens_listed_once():
    vocab = build_vocabulary([parse_source("x = 1"), parse_source("y = x + 1")])
    assert len(vocab.tokens) == len(set(vocab.tokens))
    assert vocab.tokens[2:] == tuple(sorted({"x", "=", "1", "y", "+"}))


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        build_vocabulary([])


def test_bundled_corpus_sizes():
    # independent count straight from the raw files: longest code line or
    # comment block, and the widest block of sibling statements
    k = d_max = 0
    for path in sorted(BUNDLED_CORPUS.glob("*.alg")):
        source = path.read_text()
        lines = tokenize(source)
        k = max([k, len(comment_words("\n".join(" ".join(l.texts) for l in lines if l.comment)))]
                + [len(l.tokens) for l in lines if not l.comment])
        code = [l for l in lines if not l.comment]
        for parent in [None] + list(range(len(code))):
            if parent is None:
                indent, start = code[0].indent, 0
            else:
                if not (code[parent].texts[-1] == ":" and parent + 1 < len(code)):
                    continue
                indent, start = code[parent + 1].indent, parent + 1
            n = 0
            for line in code[start:]:
                if line.indent < indent:
                    break
                n += line.indent == indent
            d_max = max(d_max, n)
    assert (VOCAB.k, VOCAB.d_max) == (k, d_max) == (23, 5)
    assert VOCAB.n_tokens == 156 and VOCAB.n_types == 11
    assert VOCAB.dim == 11 + 23 * 156


def test_vocabulary_deterministic():
    again = build_vocabulary([a for _, a in load_corpus(BUNDLED_CORPUS)])
    assert again == VOCAB and again.tokens == VOCAB.tokens
    assert Vocabulary.from_dict(VOCAB.to_dict()) == VOCAB


def test_pad_encoding():
    pad = encode_node(None, VOCAB)
    assert pad == pad_vector(VOCAB) and pad.is_pad
    assert pad.indices == (PAD,) * (1 + VOCAB.k)


def test_statement_encoding():
    vocab = Vocabulary(VOCAB.syntax_types, (PAD_TOKEN, UNK_TOKEN, "1", "=", "x"), 4, 1)
    ast = parse_source("x = 1")
    (stmt,) = ast.children(ast.root_node)
    vec = encode_node(stmt, vocab)
    assert vec.indices == (vocab.type_index(SyntaxType.STATEMENT), 4, 3, 2, PAD)
    bits = vec.bits
    assert bits.sum() == 5 and len(bits) == 11 + 4 * 5
    assert [int(np.argmax(s)) for s in slot_split(bits, 11, 5, 4)] == list(vec.indices)


def test_unknown_token():
    ast = parse_source("zzz = 1")
    (stmt,) = ast.children(ast.root_node)
    assert encode_node(stmt, VOCAB).indices[1] == UNK


def test_root_encodes_intention():
    _, ast = CORPUS[0]
    vec = encode_node(ast.root_node, VOCAB)
    assert vec.indices[0] == VOCAB.type_index(SyntaxType.MODULE)
    assert [VOCAB.tokens[i] for i in vec.indices[1:] if i != PAD] == [t.text for t in ast.root_node.intention]


def test_too_many_tokens():
    with pytest.raises(ValueError):
        encode_content(SyntaxType.STATEMENT, ["x"] * (VOCAB.k + 1), VOCAB)


def test_one_hot_decodes_to_content():
    for _, ast in CORPUS:
        for _, node in ast.walk():
            vec = encode_node(node, VOCAB)
            assert vec.bits.sum() == 1 + VOCAB.k
            syntax_type, tokens = decode_vector(vec.bits.astype(float), VOCAB)
            assert syntax_type is node.syntax_type
            assert tokens == node_content(node)


def test_uniform_slot_decodes_to_pad():
    probs = np.concatenate([np.full(VOCAB.n_types, 1 / VOCAB.n_types)]
                           + [np.full(VOCAB.n_tokens, 1 / VOCAB.n_tokens)] * VOCAB.k)
    syntax_type, tokens = decode_vector(probs, VOCAB)
    assert syntax_type is SyntaxType.PAD and tokens == []


def test_malformed_vector():
    with pytest.raises(MalformedVector):
        decode_vector(np.zeros(VOCAB.dim - 1), VOCAB)
    with pytest.raises(MalformedVector):
        decode_vector(np.zeros(VOCAB.dim), VOCAB)


@given(st.lists(st.integers(0, VOCAB.n_tokens - 1), min_size=VOCAB.k, max_size=VOCAB.k),
       st.integers(0, VOCAB.n_types - 1))
def test_every_vector_has_one_bit_per_slot(slots, type_index):
    vec = NodeVector((type_index, *slots), VOCAB.n_types, VOCAB.n_tokens)
    parts = slot_split(vec.bits, VOCAB.n_types, VOCAB.n_tokens, VOCAB.k)
    assert all(p.sum() == 1 for p in parts)
