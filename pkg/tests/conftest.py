import numpy as np
import pytest

from shiftdim import Alphabet, PeriodicOrbitMeasure, build_markov

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def tri():
    return Alphabet.uniform(3)


@pytest.fixture
def line4():
    return Alphabet.on_line([0.0, 0.5, 1.25, 2.0], labels=["a", "b", "c", "d"])


@pytest.fixture
def markov3(tri):
    return build_markov(3, 0.2, ["0", "1", "2"], tri)


def periodic(k: int) -> PeriodicOrbitMeasure:
    return PeriodicOrbitMeasure(Alphabet.uniform(max(k, 2)), np.arange(k))
