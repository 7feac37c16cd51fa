"""Energy-increment audit, mass conservation and short-time perturbation runs.

The increment identity checked here is, with u = F_n + v and e_n the
regularization defect,

    E_n(v(T2)) - E_n(v(T1)) = (1/(p+1)) * ( [B]_{T1}^{T2} + I_F + I_e )

    B   = int |v|^2 phi'(|v|^2) + |F|^2 phi'(|F|^2) - |u|^2 phi'(|u|^2)
    I_F = 2 Re int int dt(F)^* [ (g_n(u) + u |u|^2 phi''(|u|^2)) - (same at F) ]
    I_e = Re int int dt(v)^* [ v e_n(v) - u e_n(u) ]

with dt(v) = i Lap v - i g_n(u) taken from the equation and dt(F) = i Lap F.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.integrate import simpson

from .dynamics.nonlinearity import RegularizedNonlinearity, e_n_eval, g_n_eval
from .dynamics.solver import ForcingTerm, solve_forced
from .dynamics.trajectory import Trajectory
from .norms.energy import energy_n
from .norms.spaces import NormProfile, Wdot, X, Z, spacetime_norm, time_partition, x_interpolation
from .spectral.grid import Field


@dataclass
class IncrementReport:
    interval: tuple
    lhs: float
    term_boundary: float
    term_forcing: float
    term_en: float
    p: float
    snapshots: int

    @property
    def rhs(self) -> float:
        return (self.term_boundary + self.term_forcing + self.term_en) / (self.p + 1.0)

    @property
    def residual(self) -> float:
        return self.lhs - self.rhs

    def as_dict(self) -> dict:
        return {
            "T1": self.interval[0],
            "T2": self.interval[1],
            "lhs": self.lhs,
            "term_boundary": self.term_boundary,
            "term_forcing": self.term_forcing,
            "term_en": self.term_en,
            "rhs": self.rhs,
            "residual": self.residual,
            "p": self.p,
            "snapshots": self.snapshots,
        }


def _laplacian(grid, vals):
    return sfft.ifftn(-grid.k2() * sfft.fftn(vals))


def _boundary(reg: RegularizedNonlinearity, v, f, u, cell) -> float:
    def piece(w):
        x = np.abs(w) ** 2
        return x * reg.dphi(x)

    return float(reg.coupling * np.sum(piece(v) + piece(f) - piece(u)) * cell)


def _bracket(reg: RegularizedNonlinearity, w):
    # g_n(w) + w |w|^2 phi''(|w|^2)
    x = np.abs(w) ** 2
    return reg.coupling * w * (reg.dphi(x) + reg.x_ddphi(x))


def increment_decomposition(
    traj: Trajectory, forcing: ForcingTerm | None, reg: RegularizedNonlinearity, T1: float, T2: float
) -> IncrementReport:
    grid = traj.grid
    forcing = forcing or ForcingTerm.zero(grid)
    if not (traj.times[0] - 1e-12 <= T1 < T2 <= traj.times[-1] + 1e-12):
        raise ValueError(f"[{T1}, {T2}] is not covered by the trajectory [{traj.times[0]}, {traj.times[-1]}]")
    i1, i2 = traj.index_of(T1), traj.index_of(T2)
    if i2 - i1 < 2:
        raise ValueError("need at least three snapshots in [T1, T2] for Simpson quadrature")
    cell = grid.cell_volume
    forc, en = [], []
    bnd = {}
    for j in range(i1, i2 + 1):
        t = traj.times[j]
        v = traj.states[j]
        f = forcing.values(t)
        u = v + f
        gu = g_n_eval(u, reg)
        dv = 1j * _laplacian(grid, v) - 1j * gu
        df = forcing.time_derivative(t)
        forc.append(2.0 * np.real(np.sum(np.conj(df) * (_bracket(reg, u) - _bracket(reg, f)))) * cell)
        env = e_n_eval(v, reg).real
        enu = e_n_eval(u, reg).real
        en.append(reg.coupling * np.real(np.sum(np.conj(dv) * (v * env - u * enu))) * cell)
        if j in (i1, i2):
            bnd[j] = _boundary(reg, v, f, u, cell)
    times = traj.times[i1 : i2 + 1]
    lhs = energy_n(traj.state(i2), reg) - energy_n(traj.state(i1), reg)
    return IncrementReport(
        (float(traj.times[i1]), float(traj.times[i2])),
        float(lhs),
        bnd[i2] - bnd[i1],
        float(simpson(np.array(forc), x=times)),
        float(simpson(np.array(en), x=times)),
        reg.p,
        i2 - i1 + 1,
    )


def mass_check(traj: Trajectory, forcing: ForcingTerm | None = None) -> dict:
    """Relative drift of |v + F_n|_2 over the snapshots."""
    grid = traj.grid
    forcing = forcing or ForcingTerm.zero(grid)
    masses = np.array(
        [math.sqrt(np.sum(np.abs(traj.states[j] + forcing.values(t)) ** 2) * grid.cell_volume) for j, t in enumerate(traj.times)]
    )
    m0 = masses[0]
    drift = np.abs(masses - m0) / m0 if m0 > 0 else np.abs(masses - m0)
    return {"drift": float(drift.max()), "mass0": float(m0), "series": masses.tolist()}


def energy_drift(traj: Trajectory, reg: RegularizedNonlinearity) -> float:
    e = np.array([energy_n(traj.state(j), reg) for j in range(len(traj))])
    scale = abs(e[0]) if e[0] != 0 else 1.0
    return float(np.max(np.abs(e - e[0])) / scale)


def convergence_slope(dts, values) -> float:
    """Least-squares slope of log(values) against log(dts)."""
    return float(np.polyfit(np.log(np.asarray(dts)), np.log(np.asarray(values)), 1)[0])


# ---- perturbation ----------------------------------------------------------


class SmallnessError(ValueError):
    def __init__(self, message: str, measured: float):
        super().__init__(message)
        self.measured = measured


@dataclass
class PerturbationReport:
    eps: list
    wdot: list
    x: list
    interpolation: list  # dicts from x_interpolation, one per eps
    base_wdot: float
    d_param: float

    @property
    def strictly_decreasing(self) -> bool:
        order = np.argsort(self.eps)[::-1]
        vals = np.array(self.wdot)[order]
        return bool(np.all(np.diff(vals) < 0))

    @property
    def interpolation_holds(self) -> bool:
        return all(item["holds"] for item in self.interpolation)


def perturbation_experiment(
    v0: Field,
    forcing_datum: Field,
    amplitude_sweep,
    interval: tuple[float, float],
    reg: RegularizedNonlinearity,
    dt: float,
    stride: int = 1,
    smallness: float = 0.1,
    forcing_level: int | None = None,
) -> PerturbationReport:
    """Distances |v_eps - u| in W-dot and X, where v_eps solves the equation forced
    by eps * F and u the unforced one from the same v0."""
    d = reg.d_param
    base = solve_forced(v0, None, reg, interval, dt, stride)
    base_norm = spacetime_norm(base, Wdot(d))
    if base_norm > smallness:
        raise SmallnessError(f"base run has W-dot norm {base_norm:.4g} above the smallness level {smallness}", base_norm)
    wd, xs, interp = [], [], []
    for eps in amplitude_sweep:
        forcing = ForcingTerm(forcing_datum * float(eps), forcing_level, f"eps={eps}")
        run = solve_forced(v0, forcing, reg, interval, dt, stride)
        diff = Trajectory(base.grid, base.times, run.states - base.states, base.dt)
        wd.append(spacetime_norm(diff, Wdot(d)))
        xs.append(spacetime_norm(diff, X(d)))
        interp.append(x_interpolation(diff, d))
    return PerturbationReport(list(map(float, amplitude_sweep)), wd, xs, interp, base_norm, d)


# ---- bootstrap shape -------------------------------------------------------


@dataclass
class BootstrapReport:
    intervals: list
    sup_energy: list  # A_j = 1 + sup E_n over I_j
    start_energy: list
    forcing_norm: list
    ratios: list  # A_j / (1 + E_n(t_{j-1}) + |F|_Z(I_j))
    eta: float
    sigma: float

    @property
    def constant(self) -> float:
        return float(max(self.ratios)) if self.ratios else float("nan")

    @property
    def spread(self) -> float:
        return float(max(self.ratios) / min(self.ratios)) if self.ratios else float("nan")


def bootstrap_report(
    traj: Trajectory, forcing: ForcingTerm, reg: RegularizedNonlinearity, eta: float = 0.1, sigma: float = 0.01
) -> BootstrapReport:
    """Partition by the Z-norm of F_n at level eta and log the per-interval energy ratio."""
    grid = traj.grid
    ftraj = Trajectory(grid, traj.times, np.array([forcing.values(t) for t in traj.times]), traj.dt)
    spec = Z(reg.d_param, sigma)
    part = time_partition(ftraj, spec, eta)
    prof = NormProfile(ftraj, spec)
    energies = np.array([energy_n(traj.state(j), reg) for j in range(len(traj))])
    sup_e, start_e, fz, ratios = [], [], [], []
    for s, e in part.index_bounds:
        a = 1.0 + float(energies[s : e + 1].max())
        fn = prof.window(s, e)
        sup_e.append(a)
        start_e.append(float(energies[s]))
        fz.append(fn)
        ratios.append(a / (1.0 + float(energies[s]) + fn))
    return BootstrapReport(part.intervals, sup_e, start_e, fz, ratios, eta, sigma)
