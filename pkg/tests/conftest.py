import sys

import numpy as np
import pytest

from hodograph.curvature import make_profile
from hodograph.exact_solutions import ArcsineSolution, PolynomialSolution


@pytest.fixture(scope="session")
def lam_linear():
    return make_profile("linear", [1.0])


@pytest.fixture(scope="session")
def arcsine():
    return ArcsineSolution(1.0)


@pytest.fixture(scope="session")
def poly():
    return PolynomialSolution()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
