"""Decomposition atlas of a datum and its many-fold randomization.

A datum f on a periodic grid is split as

    f = sum_{M, i, j, k, l} P_j f^{M,i}_{k,l}

with M a dyadic shell, i a physical unit cube, j a unit-scale frequency cube
and (k, l) a harmonic index of the angular decomposition about the origin.
Pieces are stored as columns of a sparse matrix acting on the frequency
lattice, so an assembly f^omega = sum X * piece is one sparse mat-vec.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import sparse

from .spectral.angular import angular_bandwidth, basis_index, eval_basis, field_spectral_function, shell_coefficients
from .spectral.bessel import RadialProfile, gauss_legendre
from .spectral.cutoffs import dyadic_band, make_partition, make_unit_partition, phi_profile, shell_multiplier
from .spectral.grid import Field, Grid, forward

DISTRIBUTIONS = ("rademacher", "standard_gaussian", "uniform_pm", "ones")
_SUBGAUSSIAN_C = {"rademacher": 0.5, "standard_gaussian": 0.5, "uniform_pm": 1.0 / 6.0, "ones": math.nan}
_VARIANCE = {"rademacher": 1.0, "standard_gaussian": 1.0, "uniform_pm": 1.0 / 3.0, "ones": 0.0}


class AtlasTruncationError(ValueError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class RandomCoefficientFamily:
    distribution: str
    seed: int = 0

    def __post_init__(self) -> None:
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}; choose from {DISTRIBUTIONS}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def subgaussian_constant(self) -> float:
        """c in the moment bound E exp(g X) <= exp(c g^2); nan for the degenerate family."""
        return _SUBGAUSSIAN_C[self.distribution]

    @property
    def variance(self) -> float:
        return _VARIANCE[self.distribution]

    def generator(self, draw_index: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence([int(self.seed), int(draw_index)])
        return np.random.Generator(np.random.Philox(ss))

    def sample(self, size, draw_index: int = 0) -> np.ndarray:
        rng = self.generator(draw_index)
        return self.sample_with(rng, size)

    def sample_with(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.distribution == "rademacher":
            return 2.0 * rng.integers(0, 2, size=size).astype(float) - 1.0
        if self.distribution == "standard_gaussian":
            return rng.standard_normal(size)
        if self.distribution == "uniform_pm":
            return rng.uniform(-1.0, 1.0, size)
        return np.ones(size)

    def mgf_bound_holds(self, gammas) -> bool:
        g = np.asarray(gammas, dtype=float)
        c = self.subgaussian_constant
        if self.distribution == "rademacher":
            mgf = np.cosh(g)
        elif self.distribution == "standard_gaussian":
            mgf = np.exp(0.5 * g * g)
        elif self.distribution == "uniform_pm":
            mgf = np.where(g == 0, 1.0, np.sinh(g) / np.where(g == 0, 1.0, g))
        else:
            return False
        return bool(np.all(mgf <= np.exp(c * g * g) * (1 + 1e-12)))


@dataclass(frozen=True)
class Truncation:
    m_min: float | None = None
    m_max: float | None = None
    k_max: int = 8
    j_radius: float = 4.0


@dataclass(eq=False)
class DecompositionAtlas:
    grid: Grid
    truncation: Truncation
    d_param: float
    keys: list  # (M, i, j, k, l), sorted
    matrix: sparse.csc_matrix  # lattice (flattened) x pieces, spectral values
    datum: Field
    shells: list
    residual: float  # relative L2 reconstruction residual of the truncated sum
    angular_residual: float
    dropped_norm: float
    datum_norm: float
    piece_norms: np.ndarray = dc_field(repr=False)
    shell_norms: dict = dc_field(default_factory=dict)

    @property
    def constants(self) -> dict:
        """a_k = (2 pi)^{-d/2} i^k for the harmonic degrees present."""
        ks = sorted({k for (_, _, _, k, _) in self.keys})
        return {k: (2.0 * math.pi) ** (-self.d_param / 2.0) * (1j**k) for k in ks}

    def __len__(self) -> int:
        return len(self.keys)

    def piece(self, key) -> Field:
        col = self.keys.index(tuple(key))
        return self.piece_at(col)

    def piece_at(self, col: int) -> Field:
        vec = self.matrix[:, col].toarray().ravel()
        return Field.from_spectral(self.grid, vec.reshape(self.grid.shape))

    def assemble_spectral(self, draws) -> np.ndarray:
        draws = np.asarray(draws, dtype=float)
        if draws.shape != (len(self.keys),):
            raise ValueError(f"expected {len(self.keys)} draws, got shape {draws.shape}")
        if not self.keys:
            return np.zeros(self.grid.shape, dtype=complex)
        return (self.matrix @ draws).reshape(self.grid.shape)

    def assemble(self, draws) -> Field:
        return Field.from_spectral(self.grid, self.assemble_spectral(draws))

    def truncated(self) -> Field:
        return self.assemble(np.ones(len(self.keys)))

    def coefficients(
        self, shell: float, center, order: int = 16, min_panels: int = 16, k_max: int | None = None
    ) -> dict:
        """Unit-rescaled radial coefficients c^{M,i}_{k,l} as {(k, l): RadialProfile}.

        Computed on demand: Gauss-Legendre nodes on [1/2, 2] ([0, 2] for the
        lowest shell, which carries the zero mode), panels scaled with the
        radial oscillation M * radius.
        """
        grid = self.grid
        dim = grid.dim
        if dim < 2:
            raise ValueError("radial coefficients need the angular stage (dim 2 or 3)")
        k_max = self.truncation.k_max if k_max is None else int(k_max)
        key = (float(shell), tuple(center), order, min_panels, k_max)
        cache = self.__dict__.setdefault("_coeff_cache", {})
        if key in cache:
            return cache[key]
        m = float(shell)
        low = m == dyadic_band(grid)[0]
        piece_i = Field(grid, make_partition(grid).weight(tuple(center)) * self.datum.values)
        func, rad = field_spectral_function(piece_i)
        panels = max(min_panels, int(math.ceil(1.5 * m * rad / math.pi)))
        nodes, wts = gauss_legendre(0.0 if low else 0.5, 2.0, panels, order)
        prof_vals = phi_profile(nodes) - (0.0 if low else phi_profile(2.0 * nodes))
        cm, _, _ = shell_coefficients(func, dim, k_max, m * nodes, rad)
        cm = (m**dim) * prof_vals[:, None] * cm
        hint = (0.0 if low else 0.5, 2.0)
        out = {
            kl: RadialProfile(nodes, wts, cm[:, q], hint)
            for q, kl in enumerate(basis_index(dim, k_max))
        }
        cache[key] = out
        return out

    def manifest(self) -> dict:
        return {
            "grid": {"dim": self.grid.dim, "box_length": self.grid.box_length, "points": self.grid.points_per_axis},
            "d_param": self.d_param,
            "truncation": {
                "m_min": self.truncation.m_min,
                "m_max": self.truncation.m_max,
                "k_max": self.truncation.k_max,
                "j_radius": self.truncation.j_radius,
            },
            "shells": self.shells,
            "pieces": len(self.keys),
            "residual": self.residual,
            "angular_residual": self.angular_residual,
            "dropped_norm": self.dropped_norm,
            "datum_norm": self.datum_norm,
            "index": [
                {"M": k[0], "i": list(k[1]), "j": list(k[2]), "k": k[3], "l": k[4], "norm": float(n)}
                for k, n in zip(self.keys, self.piece_norms)
            ],
        }


def _lattice_geometry(grid: Grid):
    n = grid.points_per_axis
    idx = np.rint(np.fft.fftfreq(n) * n).astype(int)
    mesh = np.meshgrid(*([idx] * grid.dim), indexing="ij")
    sq = sum(m * m for m in mesh).ravel()
    uniq, inverse = np.unique(sq, return_inverse=True)
    radii = grid.dk * np.sqrt(uniq.astype(float))
    vecs = np.stack([m.ravel() for m in mesh], axis=1).astype(float)
    norms = np.linalg.norm(vecs, axis=1)
    dirs = np.zeros_like(vecs)
    nz = norms > 0
    dirs[nz] = vecs[nz] / norms[nz, None]
    dirs[~nz, 0] = 1.0
    return radii, inverse, dirs


def build_atlas(
    f: Field,
    truncation: Truncation | None = None,
    d_param: float | None = None,
    tol: float = 1e-6,
    drop_tol: float = 1e-9,
) -> DecompositionAtlas:
    """Decompose f into randomization pieces.

    ``tol`` bounds the relative reconstruction residual (an
    AtlasTruncationError carries it otherwise); pieces and centers whose norm
    falls below ``drop_tol * |f|`` are discarded and counted in
    ``dropped_norm``.
    """
    trunc = truncation or Truncation()
    grid = f.grid
    dim = grid.dim
    d_param = float(dim if d_param is None else d_param)
    band = dyadic_band(grid)
    shells = [m for m in band if (trunc.m_min is None or m >= trunc.m_min) and (trunc.m_max is None or m <= trunc.m_max)]
    fnorm = f.norm()
    vol = grid.volume
    if fnorm == 0.0:
        empty = sparse.csc_matrix((int(np.prod(grid.shape)), 0), dtype=complex)
        return DecompositionAtlas(grid, trunc, d_param, [], empty, f, shells, 0.0, 0.0, 0.0, 0.0, np.zeros(0))

    knorm = grid.knorm().ravel()
    radii, rad_inv, dirs = _lattice_geometry(grid)
    angular = dim >= 2
    kl = basis_index(dim, trunc.k_max) if angular else [(0, 1)]
    basis_lat = eval_basis(dim, trunc.k_max, dirs) if angular else np.ones((len(knorm), 1))

    shell_vals = {m: shell_multiplier(knorm, m, band[0]) for m in shells}
    shell_support = {m: np.nonzero(shell_vals[m])[0] for m in shells}

    upart = make_unit_partition(grid)
    unit_local = {}
    for j in upart.center_list():
        idx, vals = upart.local(j)
        if vals.size == 0:
            continue
        flat = np.ravel_multi_index(np.ix_(*idx), grid.shape).ravel() if dim > 1 else idx[0]
        unit_local[j] = (np.asarray(flat).ravel(), vals.ravel())
    jlist = list(unit_local)
    jarr = np.array(jlist, dtype=float).reshape(-1, dim)
    jnorm = np.linalg.norm(jarr, axis=1)

    def j_for_shell(m: float) -> list:
        lo = 0.0 if m == band[0] else m / 2.0
        hi = 2.0 * m
        dist = np.maximum(lo - jnorm, 0.0) + np.maximum(jnorm - hi, 0.0)
        return [jlist[q] for q in np.nonzero(dist <= trunc.j_radius)[0]]

    shell_j = {m: j_for_shell(m) for m in shells}

    partition = make_partition(grid)
    dropped2 = 0.0
    ang_resid2 = 0.0
    # first pass: per-center angular data on every lattice radius
    per_center = {}
    for center in partition.center_list():
        weight = partition.weight(center)
        if not np.any(weight > 0):
            continue
        piece_i = Field(grid, weight * f.values)
        ni = piece_i.norm()
        if ni <= drop_tol * fnorm:
            dropped2 += ni * ni
            continue
        if not angular:
            per_center[center] = forward(piece_i.values, grid).ravel()[:, None]
            continue
        func, rad = field_spectral_function(piece_i)
        coeff_u, _, _ = shell_coefficients(func, dim, trunc.k_max, radii, rad)
        recon = np.sum(coeff_u[rad_inv] * basis_lat, axis=1)
        lat_spec = forward(piece_i.values, grid).ravel()
        ang_resid2 += float(np.sum(np.abs(recon - lat_spec) ** 2) / vol)
        per_center[center] = coeff_u

    # second pass in canonical (M, i, j, k, l) order, writing CSC columns directly
    indptr = [0]
    rows, data, keys, norms = [], [], [], []
    shell_norms: dict = {}
    nnz = 0
    nlat = len(knorm)
    for m in shells:
        sup = shell_support[m]
        pos = np.full(nlat, -1)
        pos[sup] = np.arange(len(sup))
        for center, cdata in per_center.items():
            if angular:
                base = shell_vals[m][sup, None] * cdata[rad_inv[sup]] * basis_lat[sup]
            else:
                base = shell_vals[m][sup, None] * cdata[sup]
            shell_norms[(m, center)] = float(np.sqrt(np.sum(np.abs(base.sum(axis=1)) ** 2) / vol))
            for j in shell_j[m]:
                flat, psi = unit_local[j]
                loc = pos[flat]
                ok = loc >= 0
                if not np.any(ok):
                    continue
                lat_idx = flat[ok]
                vals = psi[ok, None] * base[loc[ok]]
                cn = np.sqrt(np.sum(np.abs(vals) ** 2, axis=0) / vol)
                keep = cn > drop_tol * fnorm
                dropped2 += float(np.sum(cn[~keep] ** 2))
                nkeep = int(keep.sum())
                if nkeep == 0:
                    continue
                rows.append(np.tile(lat_idx, nkeep))
                data.append(vals[:, keep].T.ravel())
                indptr.extend(nnz + len(lat_idx) * np.arange(1, nkeep + 1))
                nnz += len(lat_idx) * nkeep
                keys.extend((m, center, j, k, l) for (k, l), kp in zip(kl, keep) if kp)
                norms.extend(cn[keep].tolist())

    if keys:
        mat = sparse.csc_matrix(
            (np.concatenate(data), np.concatenate(rows).astype(np.int32), np.asarray(indptr, dtype=np.int64)),
            shape=(nlat, len(keys)),
        )
        norms = np.array(norms)
        recon = mat @ np.ones(len(keys))
    else:
        mat = sparse.csc_matrix((nlat, 0), dtype=complex)
        norms = np.zeros(0)
        recon = np.zeros(nlat, dtype=complex)
    diff = recon - f.spectral.ravel()
    residual = float(np.sqrt(np.sum(np.abs(diff) ** 2) / vol)) / fnorm
    atlas = DecompositionAtlas(
        grid=grid,
        truncation=trunc,
        d_param=d_param,
        keys=keys,
        matrix=mat,
        datum=f,
        shells=shells,
        residual=residual,
        angular_residual=math.sqrt(ang_resid2) / fnorm,
        dropped_norm=math.sqrt(dropped2),
        datum_norm=fnorm,
        piece_norms=norms,
        shell_norms=shell_norms,
    )
    if residual > tol:
        raise AtlasTruncationError(
            f"truncation leaves relative residual {residual:.3e} above tolerance {tol:.1e}", residual
        )
    return atlas


def parseval_bookkeeping(
    atlas: DecompositionAtlas, f: Field, shell: float, center, order: int = 16, k_max: int | None = None
) -> dict:
    """Both sides of the coefficient Parseval identity for one (M, i).

    ``coefficient_sum`` is sum_{k,l} |c^{M,i}_{k,l}|^2 in L2(rho^{d-1} d rho);
    ``ghat_norm2`` is |g_hat|^2 for g = P_M(phi_i f) rescaled to unit
    frequency, computed by an independent Cartesian Gauss-Legendre rule;
    ``g_norm2`` = (2 pi)^{-d} ghat_norm2 is the physical-space norm.
    ``k_max`` defaults to the full angular bandwidth of the shell.
    """
    grid = f.grid
    dim = grid.dim
    if dim < 2:
        raise ValueError("coefficient bookkeeping needs the angular stage (dim 2 or 3)")
    band = dyadic_band(grid)
    m = float(shell)
    center = tuple(center)
    partition = make_partition(grid)
    piece_i = Field(grid, partition.weight(center) * f.values)
    func, rad = field_spectral_function(piece_i)
    if k_max is None:
        # resolve every degree carried by the shell, not just the atlas truncation
        k_max = angular_bandwidth(2.0 * m, rad)
    lhs = sum(prof.norm(dim) ** 2 for prof in atlas.coefficients(m, center, order=order, k_max=k_max).values())
    panels = max(32, int(math.ceil(4.0 * m * rad / math.pi)))
    nodes, wts = gauss_legendre(-2.0, 2.0, panels, order)
    low = m == band[0]
    total = 0.0
    # integrate slab by slab along the first axis to bound memory
    rest = np.meshgrid(*([nodes] * (dim - 1)), indexing="ij")
    wrest = wts
    for _ in range(dim - 2):
        wrest = np.multiply.outer(wrest, wts)
    wrest = np.ravel(wrest)
    rest = [q.ravel() for q in rest]
    for x0, w0 in zip(nodes, wts):
        pts = np.stack([np.full(rest[0].shape, x0)] + rest, axis=1)
        r = np.linalg.norm(pts, axis=1)
        prof_vals = phi_profile(r) - (0.0 if low else phi_profile(2.0 * r))
        live = prof_vals != 0
        if not live.any():
            continue
        ghat = (m**dim) * prof_vals[live] * func(m * pts[live])
        total += w0 * float(np.sum(wrest[live] * np.abs(ghat) ** 2))
    return {
        "coefficient_sum": float(lhs),
        "ghat_norm2": total,
        "g_norm2": total * (2.0 * math.pi) ** (-dim),
        "relative_gap": abs(lhs - total) / total if total > 0 else 0.0,
    }


@dataclass(eq=False)
class RandomizedSample:
    atlas: DecompositionAtlas
    draws: np.ndarray
    assembled: Field
    family: RandomCoefficientFamily | None = None
    draw_index: int = 0


def sample_randomization(
    atlas: DecompositionAtlas, family: RandomCoefficientFamily, draw_index: int = 0, draws=None
) -> RandomizedSample:
    """Assemble f^omega.  Draws come from the per-draw stream (seed, draw_index)
    and are assigned to pieces in the atlas's sorted key order."""
    if draws is None:
        draws = family.sample(len(atlas.keys), draw_index)
    draws = np.asarray(draws, dtype=float)
    return RandomizedSample(atlas, draws, atlas.assemble(draws), family, draw_index)


# ---- concentration checks -------------------------------------------------


@dataclass
class MomentReport:
    beta: int
    trials: int
    ratio: float
    stderr: float
    moment: float
    subgaussian_constant: float
    distribution: str


def _jackknife_ratio(samples_pow: np.ndarray, beta: float, scale: float) -> tuple[float, float]:
    n = samples_pow.size
    total = samples_pow.sum()
    m = total / n
    ratio = m ** (1.0 / beta) / scale
    loo = (total - samples_pow) / (n - 1)
    r_i = loo ** (1.0 / beta) / scale
    se = math.sqrt((n - 1) / n * np.sum((r_i - r_i.mean()) ** 2))
    return float(ratio), float(se)


def min_trials(beta: int) -> int:
    return 32 * int(beta)


def khintchine_check(
    coeffs, family: RandomCoefficientFamily, beta, trials: int, draw_index: int = 0, chunk: int = 20000
):
    """Empirical |sum c_k X_k|_{L^beta(Omega)} / (sqrt(beta) |c|_2) with jackknife error.

    ``beta`` may be one even integer or a sequence; all betas share the same
    Monte-Carlo sample.  Returns a MomentReport or a list of them.
    """
    c = np.asarray(coeffs, dtype=float).ravel()
    cn = float(np.linalg.norm(c))
    if not cn > 0:
        raise ValueError("coefficient vector must be nonzero")
    betas = [beta] if np.isscalar(beta) else list(beta)
    for b in betas:
        if int(b) != b or b < 2 or int(b) % 2:
            raise ValueError(f"beta must be an even integer >= 2, got {b}")
        if trials < min_trials(int(b)):
            raise ValueError(f"{trials} trials is too few for beta={b}; need at least {min_trials(int(b))}")
    rng = family.generator(draw_index)
    sums = np.empty(trials)
    for s in range(0, trials, chunk):
        size = min(chunk, trials - s)
        sums[s : s + size] = family.sample_with(rng, (size, c.size)) @ c
    reports = []
    for b in betas:
        pw = np.abs(sums) ** int(b)
        ratio, se = _jackknife_ratio(pw, float(b), math.sqrt(b) * cn)
        reports.append(
            MomentReport(int(b), trials, ratio, se, float(pw.mean()), family.subgaussian_constant, family.distribution)
        )
    return reports[0] if np.isscalar(beta) else reports


def sobolev_norm(spectral: np.ndarray, grid: Grid, s: float, homogeneous: bool) -> float:
    k2 = grid.k2()
    weight = k2**s if homogeneous else (1.0 + k2) ** s
    return float(np.sqrt(np.sum(weight * np.abs(spectral) ** 2) / grid.volume))


@dataclass
class HsReport:
    s: float
    trials: int
    ratio: float
    stderr: float
    hs_norm: float
    truncated_ratio: float
    distribution: str
    subgaussian_constant: float
    residual: float


def hs_stability_check(
    f: Field,
    s: float,
    family: RandomCoefficientFamily,
    trials: int,
    atlas: DecompositionAtlas | None = None,
    truncation: Truncation | None = None,
) -> HsReport:
    """(E |f^omega|^2_{H-dot^s})^{1/2} / |f|_{H^s} over ``trials`` draws."""
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    if trials < 2:
        raise ValueError("trials must be at least 2")
    atlas = atlas or build_atlas(f, truncation)
    grid = f.grid
    hs = sobolev_norm(f.spectral, grid, s, homogeneous=False)
    trunc = sobolev_norm(atlas.assemble_spectral(np.ones(len(atlas.keys))), grid, s, homogeneous=True)
    vals = np.empty(trials)
    for t in range(trials):
        spec = atlas.assemble_spectral(family.sample(len(atlas.keys), t))
        vals[t] = sobolev_norm(spec, grid, s, homogeneous=True) ** 2
    ratio, se = _jackknife_ratio(vals, 2.0, hs)
    return HsReport(
        s, trials, ratio, se, hs, trunc / hs, family.distribution, family.subgaussian_constant, atlas.residual
    )
