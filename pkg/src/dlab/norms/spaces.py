"""Space-time norms on discrete trajectories.

Lebesgue norms use composite trapezoid quadrature in time over the snapshot
grid (L^inf_t is a max over snapshots) and exact grid sums in space.  Besov
norms are (sum_N (N^w |P_N v|_{L^q_t L^r_x})^2)^{1/2} over the resolvable
dyadic band.  Every norm is precomputed as per-snapshot spatial data so that
restrictions to sub-windows of snapshots are cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.fft as sfft

from ..dynamics.trajectory import Trajectory
from ..spectral.cutoffs import dyadic_band, dyadic_multiplier, low_pass_multiplier
from ..spectral.grid import Grid

INF = math.inf


@dataclass(frozen=True)
class NormSpec:
    name: str
    q: float = 2.0
    r: float = 2.0
    deriv: int = 0
    besov_weight: float | None = None
    alpha: float = 2.0
    components: tuple = ()

    def __post_init__(self) -> None:
        if self.components:
            return
        if self.q < 1 or self.r < 1:
            raise ValueError(f"exponents must be >= 1, got q={self.q}, r={self.r}")
        if self.deriv not in (0, 1):
            raise ValueError("deriv must be 0 or 1")

    @property
    def is_sum(self) -> bool:
        return bool(self.components)

    def leaves(self) -> list["NormSpec"]:
        if not self.components:
            return [self]
        out = []
        for c in self.components:
            out.extend(c.leaves())
        return out


def lebesgue(q: float, r: float, deriv: int = 0, name: str = "lebesgue_qr") -> NormSpec:
    return NormSpec(name, float(q), float(r), deriv, None, float(q))


def besov(weight: float, q: float, r: float, deriv: int = 0, name: str = "besov") -> NormSpec:
    return NormSpec(name, float(q), float(r), deriv, float(weight), max(float(q), 2.0))


def _sum(name: str, *parts: NormSpec) -> NormSpec:
    return NormSpec(name, alpha=max(p.alpha for p in parts), components=tuple(parts))


def w_exponents(d: float) -> tuple[float, float]:
    return 2.0 * (d + 2) / (d - 2), 2.0 * d * (d + 2) / (d * d + 4)


def V(d: float) -> NormSpec:
    q, r = w_exponents(d)
    return lebesgue(q, r, 0, "V")


def Wdot(d: float) -> NormSpec:
    q, r = w_exponents(d)
    return lebesgue(q, r, 1, "Wdot")


def W(d: float) -> NormSpec:
    return _sum("W", V(d), Wdot(d))


def X(d: float) -> NormSpec:
    return besov(4.0 / (d + 2), d + 2, 2.0 * (d + 2) / d, 0, "X")


def Y(d: float) -> NormSpec:
    return besov(4.0 / (d + 2), (d + 2) / 3.0, 2.0 * (d + 2) / (d + 4), 0, "Y")


def R(d: float) -> NormSpec:
    return _sum("R", V(d), Wdot(d), X(d))


def Rdot(d: float) -> NormSpec:
    return _sum("Rdot", Wdot(d), X(d))


def z_pairs(d: float, sigma: float = 0.01) -> list[tuple[int, float, float]]:
    """(deriv, q, r) of the five Z-norm terms."""
    s = sigma
    return [
        (0, 1.0 / s, 2.0 * d / (d - 4 * s)),
        (1, 2.0, (4 * d - 2) / (2 * d - 3 - s)),
        (1, 2.0, 2.0 * d * (2 * d - 1) / (2 * d * d - 7 * d + 4 + d * s)),
        (1, 1.0, 2.0 * d / (d - 4)),
        (1, (d - 2) / (d - 2 - 4 * s), 2.0 * d * (d - 2) / (d * (d - 6) + 16 * s)),
    ]


def Z(d: float, sigma: float = 0.01) -> NormSpec:
    if not 0 < sigma < 0.25:
        raise ValueError("sigma must lie in (0, 1/4)")
    if d <= 6:
        raise ValueError("the Z-norm exponents need d_param > 6")
    parts = [lebesgue(q, r, k, f"Z{i + 1}") for i, (k, q, r) in enumerate(z_pairs(d, sigma))]
    return _sum("Z", *parts)


def make_spec(name: str, d_param: float, **kw) -> NormSpec:
    """Named spec: V, W, Wdot, R, Rdot, X, Y, Z, or lebesgue/besov with explicit exponents."""
    table = {"V": V, "W": W, "Wdot": Wdot, "R": R, "Rdot": Rdot, "X": X, "Y": Y}
    if name in table:
        return table[name](d_param)
    if name == "Z":
        return Z(d_param, kw.get("sigma", 0.01))
    if name in ("lebesgue", "lebesgue_qr"):
        return lebesgue(kw["q"], kw["r"], kw.get("deriv", 0))
    if name == "besov":
        return besov(kw["weight"], kw["q"], kw["r"], kw.get("deriv", 0))
    raise ValueError(f"unknown norm {name!r}")


def default_s1_pairs(d: float) -> list[tuple[float, float]]:
    """Admissible pairs used for the S-dot^1 sup: (inf, 2), the W pair and the endpoint (2, 2d/(d-2))."""
    return [(INF, 2.0), w_exponents(d), (2.0, 2.0 * d / (d - 2))]


def s1_norm(traj: Trajectory, d_param: float, pairs=None) -> tuple[float, list]:
    """max over the declared admissible pairs of |grad v|_{L^q_t L^r_x}; returns (value, per-pair values)."""
    pairs = default_s1_pairs(d_param) if pairs is None else list(pairs)
    bad = [pr for pr in pairs if not admissible_check(pr[0], pr[1], d_param)]
    if bad:
        raise ValueError(f"pairs {bad} are not admissible at d_param={d_param}")
    vals = [spacetime_norm(traj, lebesgue(q, r, 1)) for q, r in pairs]
    return max(vals), vals


# ---- per-snapshot spatial data ---------------------------------------------


def _space_norms(grid: Grid, vals: np.ndarray, r: float) -> np.ndarray:
    axes = tuple(range(1, grid.dim + 1))
    a = np.abs(vals)
    if math.isinf(r):
        return a.max(axis=axes)
    return (np.sum(a**r, axis=axes) * grid.cell_volume) ** (1.0 / r)


def _grad_abs_batch(grid: Grid, states: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, grid.dim + 1))
    fh = sfft.fftn(states, axes=axes)
    tot = np.zeros(states.shape)
    for k in grid.wavevectors():
        tot += np.abs(sfft.ifftn(1j * k * fh, axes=axes)) ** 2
    return np.sqrt(tot)


def _block_batch(grid: Grid, states: np.ndarray, mult: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, grid.dim + 1))
    return sfft.ifftn(sfft.fftn(states, axes=axes) * mult, axes=axes)


class _Leaf:
    """Spatial norms per snapshot (one row per Besov block) plus the time rule."""

    def __init__(self, spec: NormSpec, traj: Trajectory):
        grid = traj.grid
        self.spec = spec
        self.q = spec.q
        if spec.besov_weight is None:
            base = _grad_abs_batch(grid, traj.states) if spec.deriv else traj.states
            self.rows = _space_norms(grid, base, spec.r)[None, :]
            self.weights = np.ones(1)
            self.besov = False
        else:
            band = dyadic_band(grid)
            rows = []
            for m in band:
                block = _block_batch(grid, traj.states, dyadic_multiplier(grid, m))
                if spec.deriv:
                    block = _grad_abs_batch(grid, block)
                rows.append(_space_norms(grid, block, spec.r))
            self.rows = np.array(rows)
            self.weights = np.array(band) ** spec.besov_weight
            self.band = band
            self.besov = True

    def time_norms(self, times: np.ndarray, s: int, e: int) -> np.ndarray:
        seg = self.rows[:, s : e + 1]
        if math.isinf(self.q):
            return seg.max(axis=1)
        if e <= s:
            return np.zeros(seg.shape[0])
        integral = np.trapezoid(seg**self.q, times[s : e + 1], axis=1)
        return np.maximum(integral, 0.0) ** (1.0 / self.q)

    def value(self, times, s, e) -> float:
        tn = self.time_norms(times, s, e)
        if not self.besov:
            return float(tn[0])
        return float(np.sqrt(np.sum((self.weights * tn) ** 2)))


class NormProfile:
    """A NormSpec evaluated on a trajectory, restrictable to snapshot windows."""

    def __init__(self, traj: Trajectory, spec: NormSpec):
        self.traj = traj
        self.spec = spec
        self.leaves = [_Leaf(leaf, traj) for leaf in spec.leaves()]

    def window(self, s: int, e: int) -> float:
        return float(sum(leaf.value(self.traj.times, s, e) for leaf in self.leaves))

    def full(self) -> float:
        return self.window(0, len(self.traj) - 1)


def spacetime_norm(traj: Trajectory, spec: NormSpec) -> float:
    return NormProfile(traj, spec).full()


def besov_blocks(traj: Trajectory, spec: NormSpec) -> dict:
    """Per-block weighted norms of a Besov spec plus the (zero on a full band) tail."""
    if spec.besov_weight is None:
        raise ValueError("besov_blocks needs a Besov spec")
    leaf = _Leaf(spec, traj)
    tn = leaf.time_norms(traj.times, 0, len(traj) - 1)
    grid = traj.grid
    axes = tuple(range(1, grid.dim + 1))
    covered = low_pass_multiplier(grid, leaf.band[-1])
    tail = sfft.ifftn(sfft.fftn(traj.states, axes=axes) * (1.0 - covered), axes=axes)
    return {
        "scales": list(leaf.band),
        "weighted": (leaf.weights * tn).tolist(),
        "tail_l2": float(np.max(_space_norms(grid, tail, 2.0))) if len(traj) else 0.0,
    }


# ---- divisibility ----------------------------------------------------------


@dataclass
class Partition:
    intervals: list  # (t_start, t_end)
    index_bounds: list  # (s, e) snapshot indices
    norms: list
    total: float
    eps: float
    alpha: float
    bound: float  # 2 (total / eps)^alpha

    @property
    def count(self) -> int:
        return len(self.intervals)

    def subadditive_sum(self) -> float:
        return float(np.sum(np.array(self.norms) ** self.alpha) ** (1.0 / self.alpha))


def time_partition(traj: Trajectory, spec: NormSpec, eps: float, rtol: float = 1e-12) -> Partition:
    """Greedy split on snapshot boundaries into consecutive windows of norm <= eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if math.isinf(spec.alpha):
        raise ValueError("L^inf in time is not time-divisible below its maximum")
    prof = NormProfile(traj, spec)
    total = prof.full()
    if not math.isfinite(total):
        raise ValueError("norm is not finite on this trajectory")
    last = len(traj) - 1
    bounds, norms = [], []
    s = 0
    while s < last:
        e = s + 1
        if prof.window(s, e) > eps * (1 + rtol):
            raise ValueError(
                f"a single snapshot step already has norm {prof.window(s, e):.3g} > eps={eps:.3g}; "
                "refine the snapshot spacing"
            )
        while e < last and prof.window(s, e + 1) <= eps * (1 + rtol):
            e += 1
        bounds.append((s, e))
        norms.append(prof.window(s, e))
        s = e
    if not bounds:
        bounds, norms = [(0, 0)], [0.0]
    times = traj.times
    return Partition(
        [(float(times[a]), float(times[b])) for a, b in bounds],
        bounds,
        norms,
        total,
        eps,
        spec.alpha,
        2.0 * (total / eps) ** spec.alpha,
    )


# ---- exponent arithmetic ---------------------------------------------------


def admissible_check(q: float, r: float, d_param: float, tol: float = 1e-12) -> bool:
    if q < 2 or r < 2:
        raise ValueError("admissibility needs q, r >= 2")
    lhs = (0.0 if math.isinf(q) else 2.0 / q) + (0.0 if math.isinf(r) else d_param / r)
    return abs(lhs - d_param / 2.0) <= tol


def endpoint_gain(d_param: float) -> float:
    """Supremum (d-1)/(2d-1) of the derivative gain, attained only at the excluded endpoint."""
    return (d_param - 1.0) / (2.0 * d_param - 1.0)


def derivative_gain(q: float, p0: float, d_param: float, tol: float = 1e-12) -> float:
    """2/q + d/p0 - d/2 for pairs with 1/q <= (d - 1/2)(1/2 - 1/p0), endpoint excluded."""
    d = d_param
    if q < 2 or p0 < 2:
        raise ValueError(f"need q >= 2 and p0 >= 2, got q={q}, p0={p0}")
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    inv_p = 0.0 if math.isinf(p0) else 1.0 / p0
    if abs(q - 2.0) <= tol and abs(p0 - (4 * d - 2) / (2 * d - 3)) <= tol * max(1.0, p0):
        raise ValueError(f"(q, p0) = (2, (4d-2)/(2d-3)) = (2, {p0:.12g}) is the excluded endpoint")
    bound = (d - 0.5) * (0.5 - inv_p)
    if inv_q > bound + tol:
        raise ValueError(f"constraint 1/q <= (d - 1/2)(1/2 - 1/p0) violated: {inv_q:.6g} > {bound:.6g}")
    return 2.0 * inv_q + d * inv_p - d / 2.0


def s_d_terms(d: int) -> tuple[Fraction, Fraction]:
    d = Fraction(d)
    return (4 * d - 1) / (3 * (2 * d - 1)), (d * d + 6 * d - 4) / ((2 * d - 1) * (d + 2))


def s_d(d: int) -> Fraction:
    """Regularity threshold max{(4d-1)/(3(2d-1)), (d^2+6d-4)/((2d-1)(d+2))}, exact."""
    if int(d) != d or d <= 6:
        raise ValueError("s_d is defined for integer d > 6")
    return max(s_d_terms(int(d)))


# ---- X versus W-dot --------------------------------------------------------


def _bernstein_kernel_norm(grid: Grid, m: float, s: float) -> float:
    """L^s norm of the kernel of P_{N/2} + P_N + P_{2N} (identity on the support of P_N)."""
    mult = low_pass_multiplier(grid, 2.0 * m) - low_pass_multiplier(grid, m / 4.0)
    kern = sfft.ifftn(mult) / grid.cell_volume
    if math.isinf(s):
        return float(np.abs(kern).max())
    return float((np.sum(np.abs(kern) ** s) * grid.cell_volume) ** (1.0 / s))


def x_interpolation(traj: Trajectory, d_param: float) -> dict:
    """Both sides of |w|_X <= C A^theta B^(1-theta).

    A = (sum N^2 |P_N w|_V^2)^{1/2}, B = (sum N^2 |P_N w|_{L^inf_t L^2_x}^2)^{1/2},
    theta = 2/(d-2).  C = max_N N^{4/(d+2) - 1} |K_N|_{L^s} comes from Young's
    inequality with the fattened projector kernel K_N, with
    1 + 1/r_X = 1/s + 1/r_mid; the rest is Hoelder in space, time and over N.
    """
    d = d_param
    if d <= 4:
        raise ValueError("the interpolation exponent needs d_param > 4")
    grid = traj.grid
    theta = 2.0 / (d - 2.0)
    qv, rv = w_exponents(d)
    r_x = 2.0 * (d + 2) / d
    r_mid = 2.0 * d * (d + 2) / (d * d + 2 * d - 4)
    s = 1.0 / (1.0 + 1.0 / r_x - 1.0 / r_mid)
    band = dyadic_band(grid)
    lhs = spacetime_norm(traj, X(d))
    a2 = b2 = 0.0
    const = 0.0
    blocks = []
    for m in band:
        block = _block_batch(grid, traj.states, dyadic_multiplier(grid, m))
        bt = Trajectory(grid, traj.times, block, traj.dt, adaptive=True)
        v = spacetime_norm(bt, lebesgue(qv, rv))
        e = spacetime_norm(bt, lebesgue(INF, 2.0))
        mid = spacetime_norm(bt, lebesgue(d + 2, r_mid))
        a2 += m * m * v * v
        b2 += m * m * e * e
        const = max(const, m ** (4.0 / (d + 2) - 1.0) * _bernstein_kernel_norm(grid, m, s))
        blocks.append({"N": m, "mid": mid, "holder_rhs": v**theta * e ** (1 - theta)})
    a, b = math.sqrt(a2), math.sqrt(b2)
    rhs = const * a**theta * b ** (1 - theta)
    return {
        "x_norm": lhs,
        "A": a,
        "B": b,
        "theta": theta,
        "constant": const,
        "rhs": rhs,
        "holds": bool(lhs <= rhs * (1 + 1e-10) + 1e-300),
        "blocks": blocks,
    }
