import json
from pathlib import Path

import pytest

from hsusynth import BUNDLED_CORPUS
from hsusynth.cli import run
from hsusynth.grammar import emit_source, parse_source

GOLDEN = Path(__file__).parent / "golden"

SMALL_CORPUS = {
    "one.alg": "# add numbers\nx = 1\ny = x + 1\nprint ( y )\n",
    "two.alg": "# count down\nn = 3\nwhile n > 0 :\n\tn -= 1\n",
}


@pytest.fixture
def small_dir(tmp_path):
    d = tmp_path / "corpus"
    d.mkdir()
    for name, text in SMALL_CORPUS.items():
        (d / name).write_text(text)
    return d


@pytest.fixture(scope="module")
def model_path(tmp_path_factory, trained):
    path = tmp_path_factory.mktemp("m") / "model.hsu"
    path.write_bytes(trained.data)
    return path


def test_parse_matches_golden(capsys):
    assert run(["parse", str(BUNDLED_CORPUS / "factorial.alg")]) == 0
    out = capsys.readouterr().out
    assert out == (GOLDEN / "factorial.tree").read_text()


def test_parse_leaf_lines_round_trip(capsys):
    source = (BUNDLED_CORPUS / "factorial.alg").read_text()
    run(["parse", str(BUNDLED_CORPUS / "factorial.alg")])
    lines = capsys.readouterr().out.splitlines()[1:]
    # two spaces per tree level, and top-level statements sit one level below the module
    body = ["\t" * ((len(l) - len(l.lstrip(" "))) // 2 - 1) + l.split(": ", 1)[1] for l in lines]
    assert "\n".join(body) + "\n" == emit_source(parse_source(source))


def test_usage_errors_exit_one(capsys):
    assert run([]) == 1
    assert run(["train"]) == 1
    assert run(["train", "--out", "x", "--lr", "-1"]) == 1
    assert run(["eval", "--model", "m", "--mode", "bogus"]) == 1
    assert "usage:" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "generate" in capsys.readouterr().out


def test_data_errors_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.alg"
    bad.write_text("x = = 1\n")
    assert run(["parse", str(bad)]) == 2
    assert run(["parse", str(tmp_path / "missing.alg")]) == 2
    corrupt = tmp_path / "m.hsu"
    corrupt.write_bytes(b"garbage")
    assert run(["generate", "--model", str(corrupt), "--intention", "x"]) == 2
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run(["train", "--corpus", str(empty), "--out", str(tmp_path / "o.hsu")]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_train_is_deterministic(small_dir, tmp_path):
    before = sorted(p.read_bytes() for p in small_dir.iterdir())
    a, b, c = tmp_path / "a.hsu", tmp_path / "b.hsu", tmp_path / "c.hsu"
    args = ["train", "--corpus", str(small_dir), "--epochs", "5", "--d-h", "4", "--output", str(tmp_path / "log")]
    assert run(args + ["--out", str(a)]) == 0
    assert run(args + ["--out", str(b)]) == 0
    assert run(args + ["--out", str(c), "--seed", "8"]) == 0
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()
    assert sorted(p.read_bytes() for p in small_dir.iterdir()) == before


def test_seed_falls_back_to_environment(small_dir, tmp_path, monkeypatch):
    args = ["train", "--corpus", str(small_dir), "--epochs", "3", "--d-h", "4"]
    run(args + ["--out", str(tmp_path / "a.hsu"), "--seed", "11"])
    monkeypatch.setenv("HSU_SEED", "11")
    run(args + ["--out", str(tmp_path / "b.hsu")])
    assert (tmp_path / "a.hsu").read_bytes() == (tmp_path / "b.hsu").read_bytes()


def test_inference_commands(model_path, tmp_path, capsys):
    fact = BUNDLED_CORPUS / "factorial.alg"
    assert run(["generate", "--model", str(model_path), "--intention", "factorial multiply all positive integers up to n"]) == 0
    assert capsys.readouterr().out == emit_source(parse_source(fact.read_text()))
    assert run(["interpret", "--model", str(model_path), str(fact)]) == 0
    assert capsys.readouterr().out == "factorial multiply all positive integers up to n\n"
    out = tmp_path / "done.txt"
    assert run(["complete", "--model", str(model_path), "--line", "product *= factor", "-o", str(out)]) == 0
    assert out.read_text() == emit_source(parse_source(fact.read_text()))


def test_eval_json_is_stable(model_path, capsys):
    args = ["eval", "--model", str(model_path), "--mode", "interpret", "--format", "json"]
    assert run(args) == 0
    first = capsys.readouterr().out
    assert run(args) == 0
    assert capsys.readouterr().out == first and first.endswith("\n")
    doc = json.loads(first)
    assert doc["mode"] == "interpret" and doc["programs"] == 10
