"""Cauchy check of the regularized solutions v_n as the truncation level grows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..norms.spaces import NormSpec, V, spacetime_norm
from ..spectral.grid import Field
from .nonlinearity import RegularizedNonlinearity
from .solver import ForcingTerm, solve_forced
from .trajectory import Trajectory


@dataclass
class ConvergenceReport:
    levels: list
    successive: list  # |v_{n_i} - v_{n_{i+1}}|
    reference: list  # |v_{n_i} - v_{n_last}|, i < last
    forcing_tail: list  # |F_n - F| per level
    max_amplitude: list  # sup |F_n + v_n| per level
    spec: str

    @property
    def cauchy(self) -> bool:
        s = np.asarray(self.successive)
        return bool(np.all(np.diff(s) < 0))

    def as_rows(self) -> list[dict]:
        rows = []
        for i, n in enumerate(self.levels):
            rows.append(
                {
                    "level": n,
                    "successive": self.successive[i] if i < len(self.successive) else float("nan"),
                    "reference": self.reference[i] if i < len(self.reference) else 0.0,
                    "forcing_tail": self.forcing_tail[i],
                    "max_amplitude": self.max_amplitude[i],
                }
            )
        return rows


def _difference(a: Trajectory, b: Trajectory) -> Trajectory:
    return Trajectory(a.grid, a.times, a.states - b.states, a.dt)


def regularized_convergence(
    v0: Field,
    forcing_datum: Field | None,
    interval: tuple[float, float],
    levels,
    dt: float,
    d_param: float,
    spec: NormSpec | None = None,
    stride: int = 1,
    coupling: float = 1.0,
    truncate_forcing: bool = True,
) -> ConvergenceReport:
    """Solve at each level n with g_n and F_n = P_{<=2^n} F, then measure pairwise distances.

    Distances are in ``spec`` (default V(d_param)).
    """
    levels = [int(n) for n in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError(f"levels must be strictly increasing, got {levels}")
    spec = spec or V(d_param)
    grid = v0.grid
    datum = forcing_datum if forcing_datum is not None else Field.zeros(grid)
    full = ForcingTerm(datum, None)
    runs, tails, amps = [], [], []
    for n in levels:
        reg = RegularizedNonlinearity.for_dimension(n, d_param, coupling)
        forcing = ForcingTerm(datum, n if truncate_forcing else None, f"level {n}")
        traj = solve_forced(v0, forcing, reg, interval, dt, stride)
        runs.append(traj)
        ftail = Trajectory(
            grid, traj.times, np.array([forcing.values(t) - full.values(t) for t in traj.times]), traj.dt
        )
        tails.append(spacetime_norm(ftail, spec))
        amps.append(float(max(np.abs(traj.states[j] + forcing.values(t)).max() for j, t in enumerate(traj.times))))
    successive = [spacetime_norm(_difference(a, b), spec) for a, b in zip(runs, runs[1:])]
    reference = [spacetime_norm(_difference(r, runs[-1]), spec) for r in runs[:-1]]
    return ConvergenceReport(levels, successive, reference, tails, amps, spec.name)
