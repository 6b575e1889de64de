import numpy as np
import pytest

from contact_split import problems

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def hertz2d():
    return problems.gen_hertz(2, 16)


@pytest.fixture(scope="session")
def hertz2d_reference(hertz2d):
    from contact_split.oracle import solve_saddle_point_active_set

    return solve_saddle_point_active_set(hertz2d[0])
