import time

import hypothesis
import pytest

from hsusynth import BUNDLED_CORPUS
from hsusynth.grammar import load_corpus
from hsusynth.modelio import to_bytes
from hsusynth.network import TrainConfig, train

hypothesis.settings.register_profile("default", deadline=None, max_examples=100)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile("default")


class Trained:
    """The bundled corpus, a model trained on it with the default config, and run facts."""

    def __init__(self):
        self.corpus = load_corpus(BUNDLED_CORPUS)
        self.config = TrainConfig()
        start = time.perf_counter()
        self.model = train([a for _, a in self.corpus], self.config, [n for n, _ in self.corpus])
        self.seconds = time.perf_counter() - start
        self.data = to_bytes(self.model)


_VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record one acceptance line; the terminal summary prints them in order."""

    def record(number: int, name: str, ok: bool, detail: str):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        _VERDICTS[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[number])


@pytest.fixture(scope="session")
def trained() -> Trained:
    return Trained()


@pytest.fixture(scope="session")
def corpus():
    return load_corpus(BUNDLED_CORPUS)
