"""Smooth cutoffs, the physical partition of unity and frequency projectors."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np

from .grid import Field, Grid, apply_multiplier


class EmptyBandWarning(UserWarning):
    pass


def _h(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t) -> np.ndarray:
    """C-infinity step: 1 for t <= 0, 0 for t >= 1, flat to all orders at both ends."""
    t = np.asarray(t, dtype=float)
    a = _h(1.0 - t)
    b = _h(t)
    return a / (a + b)


def radial_bump(r, inner: float, outer: float) -> np.ndarray:
    """Equal to 1 on r <= inner, 0 on r >= outer."""
    return smooth_step((np.asarray(r, dtype=float) - inner) / (outer - inner))


def phi_profile(r) -> np.ndarray:
    """Dyadic profile: 1 on |x| <= 1, 0 on |x| >= 2."""
    return radial_bump(r, 1.0, 2.0)


def unit_profile(r, dim: int) -> np.ndarray:
    """Unit-scale profile: 1 on |x| <= sqrt(dim), 0 on |x| >= 2 sqrt(dim)."""
    s = math.sqrt(dim)
    return radial_bump(r, s, 2.0 * s)


def _lattice_normalizer(points: tuple[np.ndarray, ...], dim: int) -> np.ndarray:
    """sum over k in Z^dim of unit_profile(|x - k|), using x = floor(x) + frac."""
    frac = [p - np.floor(p) for p in points]
    reach = int(math.ceil(2.0 * math.sqrt(dim))) + 1
    total = np.zeros(frac[0].shape)
    for m in itertools.product(range(-reach, reach + 1), repeat=dim):
        r2 = sum((f - mi) ** 2 for f, mi in zip(frac, m))
        total += unit_profile(np.sqrt(r2), dim)
    return total


def _wrap(delta: np.ndarray, length: float) -> np.ndarray:
    return delta - length * np.round(delta / length)


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    """Normalized bumps phi_i(x) = phi(x - i) / sum_k phi(x - k) on a periodic box."""

    grid: Grid
    centers: np.ndarray = dc_field(repr=False)
    normalizer: np.ndarray = dc_field(repr=False)

    @property
    def support_radius(self) -> float:
        return 2.0 * math.sqrt(self.grid.dim)

    def center_list(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in c) for c in self.centers]

    def raw_bump(self, center) -> np.ndarray:
        grid = self.grid
        r2 = sum(_wrap(x - c, grid.box_length) ** 2 for x, c in zip(grid.coords(), center))
        return unit_profile(np.sqrt(r2), grid.dim)

    def weight(self, center) -> np.ndarray:
        return self.raw_bump(center) / self.normalizer

    def support_box(self, center) -> tuple[np.ndarray, ...]:
        """Per-axis grid indices (periodically wrapped) covering the bump support."""
        grid = self.grid
        n = grid.points_per_axis
        rad = self.support_radius
        out = []
        for c in center:
            lo = math.floor((c - rad + 0.5 * grid.box_length) / grid.dx)
            hi = math.ceil((c + rad + 0.5 * grid.box_length) / grid.dx)
            idx = np.arange(lo, hi + 1) % n
            out.append(np.unique(idx))
        return tuple(out)

    def nonempty_centers(self) -> list[tuple[int, ...]]:
        return [c for c in self.center_list() if np.any(self.raw_bump(c) > 0)]


def make_partition(grid: Grid) -> PartitionOfUnity:
    length = grid.box_length
    if abs(length - round(length)) > 1e-12:
        raise ValueError(f"box_length must be an integer so the center lattice is periodic, got {length}")
    min_len = max(3.0, 4.0 * math.sqrt(grid.dim))
    if length < min_len:
        raise ValueError(
            f"box_length {length} too small: bumps of radius {2 * math.sqrt(grid.dim):.3f} "
            f"need box_length >= {min_len:.3f}"
        )
    half = int(round(length)) // 2
    ax = np.arange(-half, int(round(length)) - half)
    centers = np.array(list(itertools.product(ax, repeat=grid.dim)), dtype=int)
    norm = _lattice_normalizer(grid.coords(), grid.dim)
    norm.setflags(write=False)
    centers.setflags(write=False)
    return PartitionOfUnity(grid=grid, centers=centers, normalizer=norm)


# ---- dyadic shells ---------------------------------------------------------


def dyadic_band(grid: Grid) -> list[float]:
    """Resolvable dyadic scales, lowest first.

    The lowest scale is the largest power of two not above the smallest
    nonzero lattice frequency; its shell also carries the zero mode.  The
    highest covers the lattice corner so the shells telescope to 1.
    """
    lo = 2.0 ** math.floor(math.log2(grid.dk))
    hi = 2.0 ** math.ceil(math.log2(grid.corner_frequency))
    out = []
    m = lo
    while m <= hi:
        out.append(m)
        m *= 2.0
    return out


def _is_dyadic(m: float) -> bool:
    if not m > 0:
        return False
    e = math.log2(m)
    return abs(e - round(e)) < 1e-12


def shell_multiplier(knorm: np.ndarray, m: float, lowest: float) -> np.ndarray:
    if m == lowest:
        return phi_profile(knorm / m)
    return phi_profile(knorm / m) - phi_profile(2.0 * knorm / m)


def dyadic_multiplier(grid: Grid, m: float) -> np.ndarray:
    return _dyadic_multiplier(grid, float(m))


@lru_cache(maxsize=128)
def _dyadic_multiplier(grid: Grid, m: float) -> np.ndarray:
    band = dyadic_band(grid)
    if not _is_dyadic(m):
        raise ValueError(f"M must be a power of two, got {m}")
    if m < band[0] or m > band[-1]:
        out = np.zeros(grid.shape)
    else:
        out = shell_multiplier(grid.knorm(), m, band[0])
    out.setflags(write=False)
    return out


def dyadic_project(field: Field, m: float) -> Field:
    band = dyadic_band(field.grid)
    if _is_dyadic(m) and not (band[0] <= m <= band[-1]):
        warnings.warn(f"M={m} outside resolvable band [{band[0]}, {band[-1]}]", EmptyBandWarning)
        return Field.zeros(field.grid)
    return apply_multiplier(field, dyadic_multiplier(field.grid, m))


def low_pass_multiplier(grid: Grid, top: float) -> np.ndarray:
    """Multiplier of sum_{M <= top} P_M."""
    band = dyadic_band(grid)
    if top < band[0]:
        return np.zeros(grid.shape)
    if top >= band[-1]:
        return np.ones(grid.shape)
    return phi_profile(grid.knorm() / top)


def low_pass(field: Field, top: float) -> Field:
    return apply_multiplier(field, low_pass_multiplier(field.grid, top))


# ---- unit-scale frequency partition ---------------------------------------


@dataclass(frozen=True, eq=False)
class UnitPartition:
    """psi_j(xi) = phi(xi - j) / sum_k phi(xi - k) for j in Z^dim, sampled on the lattice."""

    grid: Grid
    centers: np.ndarray = dc_field(repr=False)
    normalizer: np.ndarray = dc_field(repr=False)

    @property
    def support_radius(self) -> float:
        return 2.0 * math.sqrt(self.grid.dim)

    def center_list(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in c) for c in self.centers]

    def multiplier(self, j) -> np.ndarray:
        kv = self.grid.wavevectors()
        r2 = sum((k - jj) ** 2 for k, jj in zip(kv, j))
        return unit_profile(np.sqrt(r2), self.grid.dim) / self.normalizer

    def local(self, j) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
        """Sparse form of psi_j: (per-axis fft indices, values on their tensor product)."""
        grid = self.grid
        n = grid.points_per_axis
        rad = self.support_radius
        idx = []
        for jj in j:
            lo = max(math.ceil((jj - rad) / grid.dk), -(n // 2))
            hi = min(math.floor((jj + rad) / grid.dk), n // 2 - 1)
            idx.append(np.arange(lo, hi + 1))
        if any(len(a) == 0 for a in idx):
            return tuple(np.zeros(0, int) for _ in j), np.zeros((0,) * grid.dim)
        mesh = np.meshgrid(*[a * grid.dk for a in idx], indexing="ij")
        r = np.sqrt(sum((m - jj) ** 2 for m, jj in zip(mesh, j)))
        fft_idx = tuple(a % n for a in idx)
        norm = self.normalizer[np.ix_(*fft_idx)]
        return fft_idx, unit_profile(r, grid.dim) / norm

    def overlap_count(self) -> int:
        """Largest number of psi_j that are nonzero at one lattice point."""
        kv = self.grid.wavevectors()
        count = np.zeros(self.grid.shape, dtype=int)
        for j in self.centers:
            r2 = sum((k - jj) ** 2 for k, jj in zip(kv, j))
            count += r2 < self.support_radius**2
        return int(count.max())


def make_unit_partition(grid: Grid) -> UnitPartition:
    return _make_unit_partition(grid)


@lru_cache(maxsize=16)
def _make_unit_partition(grid: Grid) -> UnitPartition:
    rad = 2.0 * math.sqrt(grid.dim)
    top = grid.nyquist + rad
    ax = np.arange(-math.ceil(top), math.ceil(top) + 1)
    kv = grid.freq_axis()
    kmin, kmax = kv.min(), kv.max()
    keep = (ax + rad > kmin) & (ax - rad < kmax)
    ax = ax[keep]
    cand = np.array(list(itertools.product(ax, repeat=grid.dim)), dtype=int)
    # drop centers whose support misses every lattice point
    knorm_max = grid.corner_frequency
    cand = cand[np.linalg.norm(cand, axis=1) < knorm_max + rad]
    norm = _lattice_normalizer(grid.wavevectors(), grid.dim)
    part = UnitPartition(grid=grid, centers=cand, normalizer=norm)
    alive = [j for j in part.center_list() if part.local(j)[1].size and np.any(part.local(j)[1] > 0)]
    centers = np.array(alive, dtype=int).reshape(-1, grid.dim)
    centers.setflags(write=False)
    norm.setflags(write=False)
    return UnitPartition(grid=grid, centers=centers, normalizer=norm)


def unit_project(field: Field, j) -> Field:
    part = make_unit_partition(field.grid)
    j = tuple(int(v) for v in np.atleast_1d(j))
    if len(j) != field.grid.dim:
        raise ValueError(f"j must have {field.grid.dim} components")
    if not any(tuple(c) == j for c in part.center_list()):
        warnings.warn(f"unit center {j} has no support on the lattice", EmptyBandWarning)
        return Field.zeros(field.grid)
    return apply_multiplier(field, part.multiplier(j))
