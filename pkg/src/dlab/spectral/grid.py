"""Periodic grids, sampled fields and the spectral transform.

The forward transform approximates the continuous Fourier transform
``f_hat(xi) = int exp(-i x.xi) f(x) dx`` by a Riemann sum over the box
``[-L/2, L/2)^dim``.  With this scaling a constant field of value 1 has
spectral mass ``L**dim`` at the zero frequency and the discrete Plancherel
identity reads

    dx**dim * sum |f|**2 == L**-dim * sum |f_hat|**2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class Grid:
    dim: int
    box_length: float
    points_per_axis: int

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")
        n = self.points_per_axis
        if n < 8 or n & (n - 1):
            raise ValueError(f"points_per_axis must be a power of two >= 8, got {n}")
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def dx(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def volume(self) -> float:
        return self.box_length**self.dim

    @property
    def dk(self) -> float:
        """Spacing of the frequency lattice."""
        return 2.0 * np.pi / self.box_length

    @property
    def nyquist(self) -> float:
        return np.pi * self.points_per_axis / self.box_length

    @property
    def corner_frequency(self) -> float:
        """Largest |xi| present on the frequency lattice."""
        return np.sqrt(self.dim) * self.nyquist

    def axis(self) -> np.ndarray:
        n = self.points_per_axis
        return -0.5 * self.box_length + self.dx * np.arange(n)

    def freq_axis(self) -> np.ndarray:
        return 2.0 * np.pi * sfft.fftfreq(self.points_per_axis, d=self.dx)

    def coords(self) -> tuple[np.ndarray, ...]:
        return _coords(self)

    def wavevectors(self) -> tuple[np.ndarray, ...]:
        return _wavevectors(self)

    def k2(self) -> np.ndarray:
        return _k2(self)

    def knorm(self) -> np.ndarray:
        return _knorm(self)


@lru_cache(maxsize=32)
def _coords(grid: Grid) -> tuple[np.ndarray, ...]:
    ax = grid.axis()
    out = np.meshgrid(*([ax] * grid.dim), indexing="ij")
    for a in out:
        a.setflags(write=False)
    return tuple(out)


@lru_cache(maxsize=32)
def _wavevectors(grid: Grid) -> tuple[np.ndarray, ...]:
    ax = grid.freq_axis()
    out = np.meshgrid(*([ax] * grid.dim), indexing="ij")
    for a in out:
        a.setflags(write=False)
    return tuple(out)


@lru_cache(maxsize=32)
def _k2(grid: Grid) -> np.ndarray:
    out = sum(k * k for k in _wavevectors(grid))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=32)
def _knorm(grid: Grid) -> np.ndarray:
    out = np.sqrt(_k2(grid))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=32)
def _phase(grid: Grid) -> np.ndarray:
    # exp(-i xi x0) with x0 = -L/2 is (-1)**k on every axis
    idx = np.rint(sfft.fftfreq(grid.points_per_axis) * grid.points_per_axis).astype(int)
    sign1 = np.where(idx % 2 == 0, 1.0, -1.0)
    out = sign1
    for _ in range(grid.dim - 1):
        out = np.multiply.outer(out, sign1)
    out = np.asarray(out, dtype=float)
    out.setflags(write=False)
    return out


def forward(values: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.fftn(values) * (grid.cell_volume * _phase(grid))


def inverse(spectral: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.ifftn(spectral * _phase(grid)) / grid.cell_volume


class Field:
    """Complex samples on a grid with a lazily cached spectral view."""

    __slots__ = ("grid", "values", "__dict__")

    def __init__(self, grid: Grid, values) -> None:
        arr = np.array(values, dtype=np.complex128)
        if arr.shape != grid.shape:
            raise ValueError(f"values shape {arr.shape} does not match grid {grid.shape}")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        return cls(grid, func(*grid.coords()))

    @classmethod
    def from_spectral(cls, grid: Grid, spectral) -> "Field":
        spectral = np.asarray(spectral, dtype=np.complex128)
        out = cls(grid, inverse(spectral, grid))
        cached = spectral.copy()
        cached.setflags(write=False)
        out.__dict__["spectral"] = cached
        return out

    @cached_property
    def spectral(self) -> np.ndarray:
        out = forward(self.values, self.grid)
        out.setflags(write=False)
        return out

    def norm(self) -> float:
        """L2 norm with the cell-volume weight."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))

    def spectral_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.spectral) ** 2) / self.grid.volume))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"Field(grid={self.grid}, norm={self.norm():.6g})"


def _same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def transform(obj, direction: str, grid: Grid | None = None):
    """Forward: Field -> spectral array.  Inverse: spectral array -> Field."""
    if direction == "forward":
        if not isinstance(obj, Field):
            raise TypeError("forward transform expects a Field")
        return obj.spectral
    if direction == "inverse":
        if isinstance(obj, Field):
            raise TypeError("inverse transform expects a spectral array and a grid")
        if grid is None:
            raise ValueError("inverse transform needs the grid")
        return Field.from_spectral(grid, obj)
    raise ValueError(f"unknown direction {direction!r}")


def apply_multiplier(field: Field, multiplier) -> Field:
    """Apply a Fourier multiplier sampled on the frequency lattice."""
    return Field(field.grid, sfft.ifftn(sfft.fftn(field.values) * multiplier))


def gradient(field: Field) -> list[np.ndarray]:
    """Spectral partial derivatives, one array per axis."""
    fh = sfft.fftn(field.values)
    return [sfft.ifftn(1j * k * fh) for k in field.grid.wavevectors()]


def grad_abs(field: Field) -> np.ndarray:
    """Pointwise Euclidean length of the spectral gradient."""
    return np.sqrt(sum(np.abs(g) ** 2 for g in gradient(field)))


def laplacian(field: Field) -> Field:
    return apply_multiplier(field, -field.grid.k2())


def inner(a: Field, b: Field) -> complex:
    _same_grid(a, b)
    return complex(np.vdot(a.values, b.values) * a.grid.cell_volume)
