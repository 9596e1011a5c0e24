import numpy as np
import pytest

from pnloops.layer import LayerProfile, solve_profile
from pnloops.potential import Potential


@pytest.fixture(scope="session")
def W():
    return Potential.calibrated_cosine(2)


@pytest.fixture(scope="session")
def exact():
    return LayerProfile.exact(200.0, 2001)


@pytest.fixture(scope="session")
def solved(W):
    return solve_profile(W, 200.0, 2001)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
