import numpy as np
import pytest

from dlab.dynamics import (
    ForcingTerm,
    RegularizedNonlinearity,
    StepSizeError,
    Trajectory,
    duhamel_residual,
    extract_scattering_state,
    free_propagate,
    solve_forced,
)
from dlab.norms import energy_n
from dlab.spectral import Field, Grid

from conftest import band_limited, rel_l2

D = 7.0


@pytest.fixture(scope="module")
def grid():
    return Grid(1, 32.0, 256)


@pytest.fixture(scope="module")
def v0(grid):
    return Field.from_function(grid, lambda x: 1.2 * np.exp(-x * x) * np.exp(1j * x))


@pytest.fixture(scope="module")
def bump(grid):
    return Field.from_function(grid, lambda x: np.exp(-((x - 3.0) ** 2) / 2) + 0j)


def reg(n=2, coupling=1.0):
    return RegularizedNonlinearity.for_dimension(n, D, coupling)


def test_zero_datum_stays_zero(grid):
    traj = solve_forced(Field.zeros(grid), None, reg(), (0.0, 0.5), 1e-2)
    assert np.all(traj.states == 0)
    assert len(traj) == 51


def test_linear_run_matches_free_propagation(grid, v0):
    traj = solve_forced(v0, None, reg(coupling=0.0), (0.0, 1.0), 1e-2, stride=10)
    for t, s in zip(traj.times, traj.states):
        assert rel_l2(s, free_propagate(v0, t).values) < 1e-12


def test_free_propagation_group_and_unitarity(grid, rng):
    f = band_limited(grid, rng, 3.0)
    a = free_propagate(free_propagate(f, 0.3), 0.4)
    assert rel_l2(a.values, free_propagate(f, 0.7).values) < 1e-12
    assert free_propagate(f, 0.7).norm() == pytest.approx(f.norm(), rel=1e-13)
    assert rel_l2(free_propagate(free_propagate(f, 0.7), -0.7).values, f.values) < 1e-12


def test_forcing_term_properties(grid, bump):
    full = ForcingTerm(bump)
    low = ForcingTerm(bump, level=1)
    norms = [low.at(t).norm() for t in (0.0, 0.5, 2.0)]
    assert np.ptp(norms) < 1e-13 * norms[0]
    spec = np.abs(low.at(0.7).spectral)
    assert np.all(spec[grid.knorm() > 2 * 2.0**1 + 1e-12] < 1e-14 * spec.max())
    assert rel_l2(full.at(0.0).values, bump.values) < 1e-13
    # d/dt F = i Lap F, checked by centred differences
    h = 1e-5
    fd = (full.values(0.3 + h) - full.values(0.3 - h)) / (2 * h)
    assert rel_l2(fd, full.time_derivative(0.3)) < 1e-8
    assert ForcingTerm.zero(grid).is_zero


def test_mass_conserved_unforced(v0):
    traj = solve_forced(v0, None, reg(), (0.0, 1.0), 1e-3, stride=100)
    m = np.array([traj.state(i).norm() ** 2 for i in range(len(traj))])
    assert np.max(np.abs(m - m[0])) / m[0] < 1e-12


def _energy_drift(v0, dt):
    r = reg()
    traj = solve_forced(v0, None, r, (0.0, 1.0), dt, stride=int(round(0.1 / dt)))
    e = np.array([energy_n(traj.state(i), r) for i in range(len(traj))])
    return np.max(np.abs(e - e[0])) / abs(e[0])


def test_energy_drift_second_order(v0):
    d1, d2 = _energy_drift(v0, 2e-3), _energy_drift(v0, 1e-3)
    assert d2 < 1e-4
    assert 3.0 < d1 / d2 < 5.0


def test_strang_is_second_order(v0, bump):
    r = reg()
    forcing = ForcingTerm(bump)
    ref = solve_forced(v0, forcing, r, (0.0, 0.5), 1.25e-4, stride=4000).states[-1]
    errs = [
        rel_l2(solve_forced(v0, forcing, r, (0.0, 0.5), dt, stride=int(round(0.5 / dt))).states[-1], ref)
        for dt in (4e-3, 2e-3, 1e-3)
    ]
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(slopes - 2.0) < 0.3)


def test_time_reversal_by_conjugation(v0):
    r = reg()
    fwd = solve_forced(v0, None, r, (0.0, 0.5), 1e-3, stride=500)
    back = solve_forced(Field(v0.grid, np.conj(fwd.states[-1])), None, r, (0.0, 0.5), 1e-3, stride=500)
    assert rel_l2(np.conj(back.states[-1]), v0.values) < 1e-10


def test_duhamel_residual_small_and_shrinks(v0, bump):
    r = reg()
    forcing = ForcingTerm(bump)
    res = []
    for dt in (2e-3, 1e-3):
        traj = solve_forced(v0, forcing, r, (0.0, 0.4), dt, stride=int(round(0.01 / dt)))
        res.append(duhamel_residual(traj, forcing, r))
    assert res[1] < res[0]
    assert res[1] < 1e-3 * v0.norm()


def test_duhamel_needs_five_snapshots(v0):
    traj = solve_forced(v0, None, reg(), (0.0, 0.03), 1e-2)
    with pytest.raises(ValueError):
        duhamel_residual(traj, None, reg())


def test_step_size_errors(grid, v0):
    big = Field.from_function(grid, lambda x: 50.0 * np.exp(-x * x) + 0j)
    with pytest.raises(StepSizeError) as info:
        solve_forced(big, None, RegularizedNonlinearity.for_dimension(64, D), (0.0, 0.1), 1e-1)
    assert 0 < info.value.suggested_dt < 1e-1
    # top of the band on this grid: |xi| = pi N / L
    rough = Field(grid, np.where(np.arange(256) % 2, 1.0, -1.0) + 0j)
    with pytest.raises(StepSizeError):
        solve_forced(rough, None, reg(), (0.0, 1.0), 0.1)


def test_bad_intervals_rejected(v0):
    with pytest.raises(ValueError):
        solve_forced(v0, None, reg(), (0.0, 1.0), 0.3)
    with pytest.raises(ValueError):
        solve_forced(v0, None, reg(), (0.0, 1.0), 0.1, stride=3)
    with pytest.raises(ValueError):
        solve_forced(v0, None, reg(), (1.0, 0.0), 0.1)


def test_scattering_curve_vanishes_for_linear_run(v0):
    traj = solve_forced(v0, None, reg(coupling=0.0), (0.0, 1.0), 1e-2, stride=10)
    v_plus, curve = extract_scattering_state(traj)
    assert curve.shape[1] == 3
    assert np.max(curve[:, 2]) < 1e-12
    assert rel_l2(v_plus.values, v0.values) < 1e-12


def test_scattering_curve_nonzero_for_nonlinear_run(v0):
    traj = solve_forced(v0, None, reg(), (0.0, 1.0), 1e-2, stride=10)
    _, curve = extract_scattering_state(traj, checkpoints=5)
    assert len(curve) == 4
    assert np.all(curve[:, 2] > 0)


def test_trajectory_validation(grid):
    f = Field.zeros(grid)
    with pytest.raises(ValueError):
        Trajectory(grid, [0.0, 0.0], np.zeros((2, 256)), 0.1)
    with pytest.raises(ValueError):
        Trajectory(grid, [0.0, 0.1, 0.3], np.zeros((3, 256)), 0.1)
    traj = Trajectory(grid, [0.0, 0.1, 0.3], np.zeros((3, 256)), 0.1, adaptive=True)
    assert traj.index_of(0.3) == 2
    with pytest.raises(ValueError):
        traj.index_of(0.2)
    const = Trajectory.constant(f, [0.0, 0.5, 1.0])
    assert len(const.window(1, 2)) == 2
    assert not const.states.flags.writeable
