import numpy as np
import pytest

from lamekit import make_params


@pytest.fixture
def params():
    return make_params(1.0, 1.0, 3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def polar_to_xy(r, phi):
    return np.asarray(r) * np.cos(phi), np.asarray(r) * np.sin(phi)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES):
            terminalreporter.write_line(line)
