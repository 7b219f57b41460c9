import numpy as np
import pytest

from gamecoding.honest_noise import HonestNoise

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def uniform():
    return HonestNoise.uniform(1.0)


@pytest.fixture
def triangular():
    # f(x) = 1 - |x| on [-1, 1]
    x = np.linspace(0.0, 1.0, 11)
    return HonestNoise.tabulated(x, 1.0 - x)


@pytest.fixture
def bumpy():
    x = np.array([0.0, 0.3, 0.55, 0.8, 1.5])
    f = np.array([0.2, 0.6, 0.1, 0.4, 0.05])
    return HonestNoise.tabulated(x, f, normalize=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
