import numpy as np
import pytest

from dlab.dynamics.convergence import regularized_convergence
from dlab.norms import Wdot
from dlab.spectral import Field, Grid

D = 7.0


@pytest.fixture(scope="module")
def grid():
    return Grid(1, 32.0, 256)


@pytest.fixture(scope="module")
def report(grid):
    v0 = Field.from_function(grid, lambda x: 5.0 * np.exp(-x * x) * np.exp(1j * x))
    bump = Field.from_function(grid, lambda x: np.exp(-((x - 3.0) ** 2) / 2) + 0j)
    return regularized_convergence(v0, bump, (0.0, 0.25), [2, 4, 8, 16], 5e-4, D, stride=5)


def test_amplitude_exceeds_lowest_levels(report):
    assert report.max_amplitude[0] > 2
    assert report.max_amplitude[1] > 4


def test_successive_distances_decrease(report):
    assert report.cauchy
    assert report.successive[0] > report.successive[1] >= report.successive[2]
    assert len(report.reference) == 3
    assert report.reference[-1] == report.successive[-1]


def test_forcing_tail_shrinks(report):
    tails = report.forcing_tail
    assert all(a >= b for a, b in zip(tails, tails[1:]))
    assert tails[-1] < 1e-10


def test_rows(report):
    rows = report.as_rows()
    assert [r["level"] for r in rows] == [2, 4, 8, 16]
    assert np.isnan(rows[-1]["successive"])


def test_levels_must_increase(grid):
    with pytest.raises(ValueError):
        regularized_convergence(Field.zeros(grid), None, (0.0, 0.1), [4, 2], 1e-2, D)


def test_identical_below_level(grid):
    # |v| stays below every level, so all runs coincide bitwise
    v0 = Field.from_function(grid, lambda x: 0.3 * np.exp(-x * x) + 0j)
    rep = regularized_convergence(v0, None, (0.0, 0.1), [1, 2, 4], 1e-2, D, spec=Wdot(D))
    assert rep.successive == [0.0, 0.0]
    assert rep.spec == "Wdot"
