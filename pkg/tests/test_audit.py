import numpy as np
import pytest

from dlab.audit import (
    SmallnessError,
    bootstrap_report,
    convergence_slope,
    energy_drift,
    increment_decomposition,
    mass_check,
    perturbation_experiment,
)
from dlab.dynamics import ForcingTerm, RegularizedNonlinearity, Trajectory, solve_forced
from dlab.spectral import Field, Grid

D = 7.0


@pytest.fixture(scope="module")
def grid():
    return Grid(1, 32.0, 256)


def gaussian(grid, amp, shift=0.0, width=1.0, phase=0.0):
    return Field.from_function(grid, lambda x: amp * np.exp(-((x - shift) ** 2) / width) * np.exp(1j * phase * x))


def test_unforced_small_amplitude_case(grid):
    reg = RegularizedNonlinearity.for_dimension(1, D)
    v0 = gaussian(grid, 0.3, phase=1.0)
    traj = solve_forced(v0, None, reg, (0.0, 1.0), 1e-3, stride=10)
    assert np.abs(traj.states).max() <= reg.n
    rep = increment_decomposition(traj, None, reg, 0.0, 1.0)
    assert rep.term_forcing == 0.0 and rep.term_en == 0.0
    assert abs(rep.term_boundary) < 1e-14
    assert abs(rep.residual) < 1e-6


def test_zero_v_case(grid):
    reg = RegularizedNonlinearity.for_dimension(1, D)
    forcing = ForcingTerm(gaussian(grid, 3.0, shift=3.0, width=2.0))
    zero = Trajectory.constant(Field.zeros(grid), np.linspace(0.0, 1.0, 11))
    rep = increment_decomposition(zero, forcing, reg, 0.0, 1.0)
    assert rep.lhs == 0.0
    assert abs(rep.residual) < 1e-10


def _forced_residual(grid, dt):
    reg = RegularizedNonlinearity.for_dimension(1, D)
    v0 = gaussian(grid, 1.2, phase=1.0)
    forcing = ForcingTerm(gaussian(grid, 1.0, shift=3.0, width=2.0))
    # snapshots every step keep the Simpson error well below the splitting error
    traj = solve_forced(v0, forcing, reg, (0.0, 0.4), dt)
    return increment_decomposition(traj, forcing, reg, 0.0, 0.4)


def test_forced_residual_second_order(grid):
    dts = [4e-3, 2e-3, 1e-3]
    reps = [_forced_residual(grid, dt) for dt in dts]
    # the run leaves the power branch, so every term is active
    assert all(abs(r.term_en) > 0 and abs(r.term_forcing) > 0 for r in reps)
    res = [abs(r.residual) for r in reps]
    assert abs(convergence_slope(dts, res) - 2.0) < 0.3
    assert 3.0 < res[0] / res[1] < 5.0


def test_increment_interval_errors(grid):
    reg = RegularizedNonlinearity.for_dimension(1, D)
    traj = solve_forced(gaussian(grid, 0.3), None, reg, (0.0, 0.1), 1e-2)
    with pytest.raises(ValueError, match="not covered"):
        increment_decomposition(traj, None, reg, 0.0, 0.5)
    with pytest.raises(ValueError, match="three snapshots"):
        increment_decomposition(traj, None, reg, 0.0, 0.01)
    rep = increment_decomposition(traj, None, reg, 0.02, 0.08)
    assert rep.snapshots == 7 and rep.interval == pytest.approx((0.02, 0.08))
    assert set(rep.as_dict()) >= {"lhs", "rhs", "residual", "term_boundary"}


def test_mass_check_cases(grid):
    reg = RegularizedNonlinearity.for_dimension(2, D)
    forcing = ForcingTerm(gaussian(grid, 1.0, shift=3.0))
    zero = Trajectory.constant(Field.zeros(grid), np.linspace(0.0, 1.0, 5))
    assert mass_check(zero)["drift"] == 0.0
    lin = solve_forced(gaussian(grid, 1.0), None, RegularizedNonlinearity(2, reg.p, 0.0), (0.0, 1.0), 1e-2, stride=10)
    assert mass_check(lin)["drift"] < 1e-12
    nl = solve_forced(gaussian(grid, 1.0), forcing, reg, (0.0, 1.0), 1e-3, stride=100)
    rep = mass_check(nl, forcing)
    assert rep["drift"] < 1e-8
    assert len(rep["series"]) == len(nl)


def test_energy_drift_and_slope(grid):
    reg = RegularizedNonlinearity.for_dimension(2, D)
    v0 = gaussian(grid, 1.2, phase=1.0)
    drifts = [energy_drift(solve_forced(v0, None, reg, (0.0, 1.0), dt, stride=int(round(0.1 / dt))), reg) for dt in (2e-3, 1e-3)]
    assert 3.0 < drifts[0] / drifts[1] < 5.0
    assert convergence_slope([1.0, 0.5, 0.25], [4.0, 1.0, 0.25]) == pytest.approx(2.0)


@pytest.fixture(scope="module")
def perturbation(grid):
    reg = RegularizedNonlinearity.for_dimension(4, D)
    return perturbation_experiment(
        gaussian(grid, 0.02), gaussian(grid, 1.0, shift=3.0, width=2.0), [0.0, 0.1, 0.05, 0.025], (0.0, 0.5), reg, 1e-3, stride=5
    )


def test_perturbation_zero_eps_is_exact(perturbation):
    assert perturbation.wdot[0] == 0.0
    assert perturbation.x[0] == 0.0


def test_perturbation_decreasing_and_interpolation(perturbation):
    assert perturbation.strictly_decreasing
    assert perturbation.interpolation_holds
    assert perturbation.base_wdot <= 0.1


def test_perturbation_smallness_error(grid):
    reg = RegularizedNonlinearity.for_dimension(4, D)
    with pytest.raises(SmallnessError) as info:
        perturbation_experiment(gaussian(grid, 2.0), gaussian(grid, 1.0), [0.1], (0.0, 0.1), reg, 1e-3, stride=10)
    assert info.value.measured > 0.1


def test_bootstrap_report(grid):
    reg = RegularizedNonlinearity.for_dimension(2, D)
    forcing = ForcingTerm(gaussian(grid, 0.05, shift=3.0, width=2.0))
    traj = solve_forced(gaussian(grid, 0.5), forcing, reg, (0.0, 2.0), 1e-3, stride=10)
    rep = bootstrap_report(traj, forcing, reg, eta=0.1, sigma=0.01)
    assert len(rep.intervals) >= 2
    assert all(z <= 0.1 * (1 + 1e-12) for z in rep.forcing_norm)
    assert np.isfinite(rep.constant) and rep.spread >= 1.0
    assert rep.intervals[0][0] == 0.0 and rep.intervals[-1][1] == pytest.approx(2.0)
