"""Strichartz-type experiments: deterministic free-evolution ratios and the
randomization-improved Besov bound, estimated by Monte Carlo.

Two models are supported.  A grid ``Field`` datum is randomized with the
decomposition atlas and evolved on the torus over a short window.  A
``RadialDatum`` lives in R^d with d = d_param: its Fourier transform is the
radial profile F0(|xi|), pieces are F0 * (dyadic shell) * (unit radial shell),
and free evolutions are computed by the k = 0 Fourier-Bessel transform, so
the physical dimension really is d_param.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft
from scipy import special

from ..randomization import DecompositionAtlas, RandomCoefficientFamily, Truncation, build_atlas, sobolev_norm
from ..spectral.angular import sphere_area
from ..spectral.bessel import bessel_order, gauss_legendre
from ..spectral.cutoffs import phi_profile, smooth_step
from ..spectral.grid import Field, Grid
from ..dynamics.trajectory import Trajectory
from .spaces import NormProfile, besov, derivative_gain, lebesgue


# ---- deterministic ---------------------------------------------------------


def random_band_limited(grid: Grid, rng: np.random.Generator, band: float, width: float | None = None) -> Field:
    """Random complex Fourier data on |xi| <= band under a Gaussian physical envelope."""
    kn = grid.knorm()
    coeff = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * (kn <= band)
    f = Field(grid, sfft.ifftn(coeff))
    if width is not None:
        env = np.exp(-sum(x * x for x in grid.coords()) / (2 * width * width))
        f = Field(grid, f.values * env)
    return f * (1.0 / f.norm())


def recurrence_time(grid: Grid, max_freq: float) -> float:
    """L^2 / (4 pi max|xi|): a packet at max_freq crosses the box in about this time."""
    return grid.box_length**2 / (4.0 * math.pi * max(max_freq, grid.dk))


def free_trajectory(field: Field, times: np.ndarray) -> Trajectory:
    grid = field.grid
    raw = sfft.fftn(field.values)
    axes = tuple(range(1, grid.dim + 1))
    prop = np.exp(-1j * np.multiply.outer(times, grid.k2()))
    states = sfft.ifftn(prop * raw[None], axes=axes)
    return Trajectory(grid, times, states, float(times[1] - times[0]) if len(times) > 1 else 0.0)


def deterministic_strichartz(fields: Sequence[Field], pairs, d_param: float, window: float, snapshots: int = 33) -> np.ndarray:
    """|e^{it Lap} f|_{L^q_t L^r_x([0, window])} / |f|_2, shape (len(fields), len(pairs))."""
    times = np.linspace(0.0, window, snapshots)
    out = np.empty((len(fields), len(pairs)))
    for i, f in enumerate(fields):
        traj = free_trajectory(f, times)
        for k, (q, r) in enumerate(pairs):
            out[i, k] = NormProfile(traj, lebesgue(q, r)).full() / f.norm()
    return out


# ---- randomized ------------------------------------------------------------


@dataclass(frozen=True)
class RadialDatum:
    """f in R^d given by its Fourier profile F0, supported in |xi| <= rho_max."""

    profile: Callable[[np.ndarray], np.ndarray]
    rho_max: float
    d_param: float = 7.0
    label: str = "radial"


def radial_unit_shell(rho: np.ndarray, j: int) -> np.ndarray:
    """psi_j = step(rho - j + 1/2) - step(rho - j - 1/2): 1 on [j - 1/4, j + 1/4], telescoping to 1."""

    def rise(x):
        return 1.0 - smooth_step((x + 0.25) / 0.5)

    if j == 0:
        return 1.0 - rise(rho - 0.5)
    return rise(rho - j + 0.5) - rise(rho - j - 0.5)


def _shells(lowest: float, top: float) -> list[float]:
    out = [lowest]
    while out[-1] < top:
        out.append(out[-1] * 2.0)
    return out


def _shell(rho, m, lowest):
    if m == lowest:
        return phi_profile(rho / m)
    return phi_profile(rho / m) - phi_profile(2.0 * rho / m)


@dataclass
class StrichartzStats:
    betas: list
    moments: list  # (E |B|^beta)^{1/beta}
    ratios: list  # moments / |f|_{H^s}
    normalized: list  # ratios / sqrt(beta)
    stderr: list
    hs_norm: float
    regularity: float
    gain: float
    trials: int
    pieces: int
    values: np.ndarray = dc_field(repr=False)
    label: str = ""

    @property
    def max_normalized(self) -> float:
        return float(max(self.normalized))


class RandomizedStrichartz:
    """Per-draw Besov norm of e^{it Lap} f^omega.

    Unweighted: regularity s + gain(q, p0), time exponent q, space exponent p,
    window [0, window].  Weighted by t^sigma: regularity s, window [1, window],
    under sigma < d/2 - 1/q - d/p.
    """

    def __init__(
        self,
        datum,
        s: float,
        q: float,
        p: float,
        p0: float,
        family: RandomCoefficientFamily,
        window: float = 1.0,
        weighted: float | None = None,
        snapshots: int = 33,
        truncation: Truncation | None = None,
        lowest: float = 0.25,
        drop_tol: float = 1e-12,
    ):
        if not isinstance(datum, (RadialDatum, Field)):
            raise TypeError("datum must be a RadialDatum or a Field")
        if not s >= 0:
            raise ValueError("s must be nonnegative")
        d = datum.d_param if isinstance(datum, RadialDatum) else float(datum.grid.dim)
        if p < p0:
            raise ValueError(f"need p >= p0, got p={p}, p0={p0}")
        self.gain = derivative_gain(q, p0, d)
        self.sigma = weighted
        if weighted is not None:
            if not 0 <= weighted < d / 2 - 1 / q - d / p:
                raise ValueError(f"weight exponent must satisfy 0 <= sigma < d/2 - 1/q - d/p = {d / 2 - 1 / q - d / p:.4g}")
            if window <= 1:
                raise ValueError("the weighted window is [1, window]; window must exceed 1")
            self.regularity = s
            times = np.linspace(1.0, window, snapshots)
        else:
            self.regularity = s + self.gain
            times = np.linspace(0.0, window, snapshots)
        self.times = times
        self.weight = times**weighted if weighted is not None else np.ones_like(times)
        self.family = family
        self.s, self.q, self.p, self.p0, self.d = s, q, p, p0, d
        self.datum = datum
        if isinstance(datum, RadialDatum):
            self._setup_radial(datum, lowest, drop_tol)
        else:
            self._setup_grid(datum, truncation)

    # radial model ------------------------------------------------------------

    def _setup_radial(self, datum: RadialDatum, lowest: float, drop_tol: float) -> None:
        d = datum.d_param
        rho_max = datum.rho_max
        tmax = float(self.times[-1])
        r_max = 10.0 + 2.5 * tmax * rho_max
        osc = r_max * rho_max / (2 * math.pi) + tmax * rho_max**2 / math.pi
        rho, wr = gauss_legendre(0.0, rho_max, max(4, int(math.ceil(osc / 2.0))), 16)
        r, wx = gauss_legendre(0.0, r_max, max(4, int(math.ceil(rho_max * r_max / (2 * math.pi) / 2.0))), 16)
        f0 = np.asarray(datum.profile(rho), dtype=complex)
        area = sphere_area(d)
        self._area = area
        self._r, self._wx = r, wx
        fnorm2 = area * (2 * math.pi) ** (-d) * np.sum(wr * np.abs(f0) ** 2 * rho ** (d - 1))
        self.hs_norm = float(
            math.sqrt(area * (2 * math.pi) ** (-d) * np.sum(wr * (1 + rho**2) ** self.s * np.abs(f0) ** 2 * rho ** (d - 1)))
        )
        shells = _shells(lowest, rho_max)
        pieces = []
        for m in shells:
            sm = _shell(rho, m, lowest)
            for j in range(0, int(math.ceil(rho_max)) + 2):
                piece = f0 * sm * radial_unit_shell(rho, j)
                n2 = area * (2 * math.pi) ** (-d) * np.sum(wr * np.abs(piece) ** 2 * rho ** (d - 1))
                if n2 > (drop_tol**2) * fnorm2:
                    pieces.append(piece)
        self.pieces = len(pieces)
        nu = bessel_order(0, d)
        kern = (2 * math.pi) ** (-d / 2) * r[:, None] ** (-(d - 2) / 2) * special.jv(nu, np.outer(r, rho))
        kern = kern * (rho ** (d / 2) * wr)[None, :]
        prop = np.exp(-1j * np.outer(self.times, rho**2))
        blocks = _shells(lowest, rho_max)
        self.blocks = blocks
        # basis[N, piece, t, r]
        basis = np.empty((len(blocks), len(pieces), len(self.times), len(r)), dtype=complex)
        for a, n in enumerate(blocks):
            bn = _shell(rho, n, lowest)
            for b, piece in enumerate(pieces):
                basis[a, b] = (prop * (piece * bn)[None, :]) @ kern.T
        self._basis = basis

    def _radial_value(self, draws: np.ndarray) -> float:
        u = np.tensordot(draws, self._basis, axes=([0], [1]))  # (N, t, r)
        space = (self._area * np.sum(self._wx * np.abs(u) ** self.p * self._r ** (self.d - 1), axis=-1)) ** (1 / self.p)
        space = space * self.weight[None, :]
        if math.isinf(self.q):
            tn = space.max(axis=1)
        else:
            tn = np.trapezoid(space**self.q, self.times, axis=1) ** (1 / self.q)
        w = np.array(self.blocks) ** self.regularity
        return float(np.sqrt(np.sum((w * tn) ** 2)))

    # torus model -------------------------------------------------------------

    def _setup_grid(self, datum: Field, truncation: Truncation | None) -> None:
        self.atlas: DecompositionAtlas = build_atlas(datum, truncation, d_param=self.d)
        self.pieces = len(self.atlas)
        self.hs_norm = sobolev_norm(datum.spectral, datum.grid, self.s, homogeneous=False)
        self._spec = besov(self.regularity, self.q, self.p)

    def _grid_value(self, draws: np.ndarray) -> float:
        f = self.atlas.assemble(draws)
        traj = free_trajectory(f, self.times)
        if self.sigma is not None:
            traj = Trajectory(traj.grid, traj.times, traj.states * self.weight.reshape((-1,) + (1,) * traj.grid.dim), traj.dt)
        return NormProfile(traj, self._spec).full()

    # draws ---------------------------------------------------------------------

    def draw(self, index: int) -> float:
        draws = self.family.sample(self.pieces, index)
        if isinstance(self.datum, RadialDatum):
            return self._radial_value(draws)
        return self._grid_value(draws)

    def summarize(self, values, betas=(1, 2, 4)) -> StrichartzStats:
        values = np.asarray(values, dtype=float)
        moments, ratios, norm, errs = [], [], [], []
        for b in betas:
            pw = values**b
            m = float(pw.mean() ** (1 / b))
            n = len(values)
            if n > 1:
                loo = ((pw.sum() - pw) / (n - 1)) ** (1 / b)
                se = float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
            else:
                se = float("nan")
            moments.append(m)
            ratios.append(m / self.hs_norm)
            norm.append(m / self.hs_norm / math.sqrt(b))
            errs.append(se / self.hs_norm)
        label = self.datum.label if isinstance(self.datum, RadialDatum) else "field"
        return StrichartzStats(
            list(betas), moments, ratios, norm, errs, self.hs_norm, self.regularity, self.gain, len(values), self.pieces, values, label
        )


def randomized_strichartz_experiment(
    datum,
    s: float,
    q: float,
    p: float,
    p0: float,
    family: RandomCoefficientFamily,
    trials: int,
    weighted: tuple[float, float] | None = None,
    window: float = 1.0,
    betas=(1, 2, 4),
    **kw,
) -> StrichartzStats:
    """Run ``trials`` draws sequentially; ``weighted=(sigma, T)`` selects the t^sigma mode on [1, T]."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if weighted is not None:
        sigma, window = weighted
        exp = RandomizedStrichartz(datum, s, q, p, p0, family, window=window, weighted=sigma, **kw)
    else:
        exp = RandomizedStrichartz(datum, s, q, p, p0, family, window=window, **kw)
    values = [exp.draw(i) for i in range(trials)]
    return exp.summarize(values, betas)
