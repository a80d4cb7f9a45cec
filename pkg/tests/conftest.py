import numpy as np
import pytest

from tsp_indep.partition import AxisCell, Dataset


def grid_cells_2d(xcut=0.5, ycut=0.5):
    """Four quadrant cells of the plane cut at (xcut, ycut)."""
    inf = np.inf
    xs = [(-inf, xcut), (xcut, inf)]
    ys = [(-inf, ycut), (ycut, inf)]
    return [AxisCell(np.array([xl, yl]), np.array([xu, yu])) for xl, xu in xs for yl, yu in ys]


@pytest.fixture
def diag4():
    return Dataset(np.array([[0, 0], [0, 0.1], [1, 1], [1, 1.1]], dtype=float), 1, 1)


@pytest.fixture
def product4():
    return Dataset(np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float), 1, 1)


@pytest.fixture
def quad_cells():
    return grid_cells_2d()


@pytest.fixture
def gauss_data():
    def make(n, rho=0.5, seed=0, d_pairs=1):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((n, d_pairs))
        y = rho * x + np.sqrt(1 - rho * rho) * rng.standard_normal((n, d_pairs))
        return Dataset(np.hstack([x, y]), d_pairs, d_pairs)

    return make


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
