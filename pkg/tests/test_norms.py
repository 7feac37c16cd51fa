import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dlab.dynamics import RegularizedNonlinearity, Trajectory, free_propagate
from dlab.norms import (
    V,
    W,
    X,
    Y,
    Z,
    Wdot,
    admissible_check,
    besov,
    besov_blocks,
    default_s1_pairs,
    derivative_gain,
    endpoint_gain,
    energy,
    energy_n,
    free_trajectory,
    kinetic_energy,
    lebesgue,
    make_spec,
    s1_norm,
    s_d,
    s_d_terms,
    spacetime_norm,
    time_partition,
    w_exponents,
    x_interpolation,
)
from dlab.spectral import Field, Grid, dyadic_band

from conftest import band_limited

D = 7.0


@pytest.fixture(scope="module")
def grid():
    return Grid(1, 32.0, 128)


@pytest.fixture(scope="module")
def traj(grid):
    f = band_limited(grid, np.random.default_rng(3), 3.0) * 0.05
    return free_trajectory(f, np.linspace(0.0, 1.0, 21))


# ---- exponent arithmetic ----

GAIN_ORACLE = [
    # (q, p0, d, expected gain or None for an error)
    (2.0, 26.0 / 10.99, 7.0, 6.0 / 13.0 - 0.035 / 13.0),
    (2.0, 14.0 / 5.0, 7.0, 0.0),
    (math.inf, 2.0, 7.0, 0.0),
    (4.0, 3.0, 7.0, 0.5 + 7.0 / 3.0 - 3.5),
    (2.0, 26.0 / 11.0, 7.0, None),  # excluded endpoint
    (2.0, 2.2, 7.0, None),  # 1/q > (d - 1/2)(1/2 - 1/p0)
]

ADMISSIBLE_ORACLE = [
    (math.inf, 2.0, 7.0, True),
    (math.inf, 2.0, 3.0, True),
    (2.0, 14.0 / 5.0, 7.0, True),
    (2.0, 2.0, 3.0, False),
    (18.0 / 5.0, 126.0 / 53.0, 7.0, True),  # the W pair at d = 7
    (9.0, 18.0 / 7.0, 7.0, False),  # the X exponents are not admissible
    (4.0, 4.0, 7.0, False),
]


@pytest.mark.parametrize("q, r, d, expected", ADMISSIBLE_ORACLE)
def test_admissible_table(q, r, d, expected):
    assert admissible_check(q, r, d) is expected


@pytest.mark.parametrize("q, p0, d, expected", GAIN_ORACLE)
def test_gain_table(q, p0, d, expected):
    if expected is None:
        with pytest.raises(ValueError):
            derivative_gain(q, p0, d)
    else:
        assert derivative_gain(q, p0, d) == pytest.approx(expected, abs=1e-12)


def test_gain_near_endpoint_example():
    assert derivative_gain(2.0, 26.0 / 10.99, 7.0) == pytest.approx(0.45885, abs=5e-6)
    assert endpoint_gain(7.0) == pytest.approx(6.0 / 13.0)


def test_gain_error_messages_name_the_inequality():
    with pytest.raises(ValueError, match="excluded endpoint"):
        derivative_gain(2.0, 26.0 / 11.0, 7.0)
    with pytest.raises(ValueError, match="1/q <= "):
        derivative_gain(2.0, 2.2, 7.0)


def test_admissible_rejects_small_exponents():
    with pytest.raises(ValueError):
        admissible_check(1.5, 2.0, 3.0)


@given(st.floats(2.0, 1e6), st.sampled_from([7.0, 8.0, 10.0]))
def test_admissible_pairs_have_zero_gain(q, d):
    r = 2 * d * q / (d * q - 4)
    assert admissible_check(q, r, d, tol=1e-9)
    if not (abs(q - 2) < 1e-12):
        assert derivative_gain(q, r, d) == pytest.approx(0.0, abs=1e-9)


def test_s_d_values():
    assert s_d(7) == Fraction(87, 117)
    assert s_d_terms(7) == (Fraction(27, 39), Fraction(87, 117))
    a, b = s_d_terms(10)
    assert a == b == s_d(10)  # crossover
    a, b = s_d_terms(11)
    assert a > b and s_d(11) == Fraction(43, 63)
    for d in range(7, 11):
        first, second = s_d_terms(d)
        assert second >= first
    with pytest.raises(ValueError):
        s_d(6)


def test_w_exponents_admissible():
    for d in (7.0, 9.0, 12.0):
        q, r = w_exponents(d)
        assert admissible_check(q, r, d)
        assert V(d).alpha == pytest.approx(2 * (d + 2) / (d - 2))
        assert W(d).alpha == V(d).alpha


def test_spec_exponents():
    x = X(D)
    assert (x.q, x.r, x.besov_weight) == pytest.approx((9.0, 18.0 / 7.0, 4.0 / 9.0))
    y = Y(D)
    assert (y.q, y.r) == pytest.approx((3.0, 18.0 / 11.0))
    assert [leaf.name for leaf in Z(D).leaves()] == ["Z1", "Z2", "Z3", "Z4", "Z5"]
    with pytest.raises(ValueError):
        Z(5.0)
    with pytest.raises(ValueError):
        lebesgue(0.5, 2.0)
    with pytest.raises(ValueError):
        make_spec("nope", D)
    assert make_spec("besov", D, weight=1.0, q=2.0, r=2.0).besov_weight == 1.0


# ---- space-time norms ----


def test_time_constant_lebesgue(grid):
    f = band_limited(grid, np.random.default_rng(1), 2.0)
    tr = Trajectory.constant(f, np.linspace(0, 1, 11))
    for r in (2.0, 3.0, math.inf):
        ref = np.max(np.abs(f.values)) if math.isinf(r) else (np.sum(np.abs(f.values) ** r) * grid.dx) ** (1 / r)
        assert spacetime_norm(tr, lebesgue(4.0, r)) == pytest.approx(ref, rel=1e-12)


def test_zero_trajectory_has_zero_norms(grid):
    tr = Trajectory.constant(Field.zeros(grid), np.linspace(0, 1, 5))
    for name in ("V", "W", "Wdot", "R", "Rdot", "X", "Y", "Z"):
        assert spacetime_norm(tr, make_spec(name, D)) == 0.0


def test_single_block_besov():
    g = Grid(1, 2 * math.pi, 64)
    assert 4.0 in dyadic_band(g)
    f = Field.from_function(g, lambda x: np.exp(4j * x))
    tr = Trajectory.constant(f, np.linspace(0, 1, 5))
    spec = besov(0.7, 3.0, 4.0)
    block = spacetime_norm(tr, lebesgue(3.0, 4.0))
    assert spacetime_norm(tr, spec) == pytest.approx(4.0**0.7 * block, rel=1e-12)
    blocks = besov_blocks(tr, spec)
    assert blocks["tail_l2"] < 1e-12
    w = np.array(blocks["weighted"])
    assert np.sum(w > 1e-12 * w.max()) == 1


@given(st.floats(-3, 3).filter(lambda c: abs(c) > 1e-3), st.sampled_from(["V", "Wdot", "X", "Y", "Z"]))
def test_homogeneity(traj, c, name):
    spec = make_spec(name, D)
    assert spacetime_norm(traj.scaled(c), spec) == pytest.approx(abs(c) * spacetime_norm(traj, spec), rel=1e-10)


@pytest.mark.parametrize("name", ["V", "Wdot", "X", "Z"])
def test_monotone_in_time_window(traj, name):
    spec = make_spec(name, D)
    full = spacetime_norm(traj, spec)
    assert spacetime_norm(traj.window(0, 10), spec) <= full
    assert spacetime_norm(traj.window(5, 15), spec) <= full


def test_triangle_inequality(grid, traj):
    other = free_trajectory(band_limited(grid, np.random.default_rng(4), 2.0) * 0.05, traj.times)
    both = Trajectory(grid, traj.times, traj.states + other.states, traj.dt)
    for spec in (V(D), Wdot(D), X(D)):
        assert spacetime_norm(both, spec) <= spacetime_norm(traj, spec) + spacetime_norm(other, spec) + 1e-14


def test_derivative_norm_of_plane_wave():
    g = Grid(1, 2 * math.pi, 32)
    f = Field.from_function(g, lambda x: np.exp(3j * x))
    tr = Trajectory.constant(f, [0.0, 1.0])
    assert spacetime_norm(tr, lebesgue(2.0, 2.0, deriv=1)) == pytest.approx(3.0 * math.sqrt(2 * math.pi))


# ---- time divisibility ----


def test_partition_single_interval(traj):
    part = time_partition(traj, V(D), 2 * spacetime_norm(traj, V(D)))
    assert part.count == 1
    assert part.intervals == [(0.0, 1.0)]


def test_partition_time_constant_halves(grid):
    f = band_limited(grid, np.random.default_rng(2), 2.0)
    tr = Trajectory.constant(f, np.linspace(0, 1, 21))
    spec = V(D)
    eps = spacetime_norm(tr, spec) / 2 ** (1 / spec.alpha)
    part = time_partition(tr, spec, eps)
    assert part.count == 2
    assert part.intervals == [(0.0, 0.5), (0.5, 1.0)]


@pytest.mark.parametrize("name", ["V", "Wdot", "X", "W"])
@pytest.mark.parametrize("frac", [0.9, 0.75, 0.6])
def test_partition_invariants(traj, name, frac):
    # a step of length h carries about h^{1/alpha} of the norm, so use fine snapshots
    traj = free_trajectory(traj.state(0), np.linspace(0.0, 1.0, 401))
    spec = make_spec(name, D)
    total = spacetime_norm(traj, spec)
    part = time_partition(traj, spec, frac * total)
    assert all(n <= frac * total * (1 + 1e-12) for n in part.norms)
    assert part.count <= part.bound
    assert part.subadditive_sum() <= total * (1 + 1e-10)
    ends = [b for _, b in part.intervals]
    starts = [a for a, _ in part.intervals]
    assert starts[0] == 0.0 and ends[-1] == 1.0 and starts[1:] == ends[:-1]


def test_partition_errors(traj):
    with pytest.raises(ValueError):
        time_partition(traj, V(D), 0.0)
    with pytest.raises(ValueError, match="single snapshot step"):
        time_partition(traj, V(D), 1e-9)
    with pytest.raises(ValueError):
        time_partition(traj, lebesgue(math.inf, 2.0), 1.0)


# ---- energies ----


def test_energy_of_zero(grid):
    assert energy(Field.zeros(grid), 9 / 5) == 0.0


def test_plane_wave_kinetic_energy():
    g = Grid(2, 2 * math.pi, 16)
    a = 0.3 - 0.4j
    f = Field.from_function(g, lambda x, y: a * np.exp(1j * (2 * x - 3 * y)))
    assert kinetic_energy(f) == pytest.approx(0.5 * abs(a) ** 2 * 13 * (2 * math.pi) ** 2, rel=1e-12)


def test_gaussian_kinetic_energy():
    g = Grid(1, 40.0, 512)
    f = Field.from_function(g, lambda x: np.exp(-x * x / 2) + 0j)
    assert kinetic_energy(f) == pytest.approx(math.sqrt(math.pi) / 4, abs=1e-6)


def test_energy_n_below_energy(grid):
    f = band_limited(grid, np.random.default_rng(5), 2.0)
    f = f * (3.0 / f.max_abs())
    p = 9 / 5
    vals = [energy_n(f, RegularizedNonlinearity(n, p)) for n in (1, 2, 4)]
    assert all(v <= energy(f, p) * (1 + 1e-12) for v in vals)
    assert vals[0] <= vals[1] <= vals[2]
    assert vals[2] == pytest.approx(energy(f, p), rel=1e-12)  # |f| <= 4


# ---- S-dot^1 and interpolation ----


def test_s1_norm(traj):
    value, per_pair = s1_norm(traj, D)
    assert len(per_pair) == len(default_s1_pairs(D))
    assert value == max(per_pair) > 0
    # the (inf, 2) entry is sup_t |grad v|_2, constant under free flow
    grad0 = spacetime_norm(traj.window(0, 0), lebesgue(math.inf, 2.0, 1))
    assert per_pair[0] == pytest.approx(grad0, rel=1e-12)
    with pytest.raises(ValueError):
        s1_norm(traj, D, pairs=[(4.0, 4.0)])


def test_x_interpolation_holds(traj):
    rep = x_interpolation(traj, D)
    assert rep["holds"]
    assert rep["theta"] == pytest.approx(0.4)
    assert rep["x_norm"] == pytest.approx(spacetime_norm(traj, X(D)))
    for b in rep["blocks"]:
        assert b["mid"] <= b["holder_rhs"] * (1 + 1e-9) + 1e-300


def test_x_interpolation_on_free_flow_2d():
    g = Grid(2, 16.0, 32)
    f = band_limited(g, np.random.default_rng(8), 3.0)
    tr = free_trajectory(f, np.linspace(0, 0.5, 9))
    assert x_interpolation(tr, D)["holds"]
    with pytest.raises(ValueError):
        x_interpolation(tr, 4.0)


def test_free_trajectory_matches_propagation(grid):
    f = band_limited(grid, np.random.default_rng(6), 2.0)
    tr = free_trajectory(f, [0.0, 0.25, 0.5])
    assert np.allclose(tr.states[2], free_propagate(f, 0.5).values, atol=1e-13)
