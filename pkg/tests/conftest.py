import numpy as np
import pytest

from plapmix.discretize import EnergyModel, Grid
from plapmix.geometry import Interval
from plapmix.kernel import Kernel, quadrature_weights


def interval_model(a=-2.0, b=2.0, h=1 / 64, r_j=1.0, profile="tent", center=None):
    grid = Grid(Interval(a, b), h, r_j, center=center)
    return EnergyModel(grid, quadrature_weights(Kernel(profile, r_j, 1), h))


@pytest.fixture(scope="session")
def reference_model():
    """interval(-2, 2), tent kernel with R_J = 1, h = 1/64."""
    return interval_model()


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
