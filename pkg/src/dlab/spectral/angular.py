"""Circular and spherical harmonic bases, sphere quadrature and angular decomposition."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .bessel import RadialProfile, bessel_order, gauss_legendre
from .grid import Field


class TruncationWarning(UserWarning):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def harmonic_count(dim: int, k: int) -> int:
    if dim == 2:
        return 1 if k == 0 else 2
    if dim == 3:
        return 2 * k + 1
    raise ValueError(f"harmonic bases are implemented for dim 2 and 3, got {dim}")


def basis_index(dim: int, k_max: int) -> list[tuple[int, int]]:
    return [(k, l) for k in range(k_max + 1) for l in range(1, harmonic_count(dim, k) + 1)]


def sphere_area(dim: int) -> float:
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def eval_basis(dim: int, k_max: int, directions: np.ndarray) -> np.ndarray:
    """Real orthonormal harmonics at unit vectors, shape (points, basis size)."""
    u = np.atleast_2d(np.asarray(directions, dtype=float))
    if dim == 2:
        theta = np.arctan2(u[:, 1], u[:, 0])
        cols = [np.full(theta.shape, 1.0 / math.sqrt(2.0 * math.pi))]
        for k in range(1, k_max + 1):
            cols.append(np.cos(k * theta) / math.sqrt(math.pi))
            cols.append(np.sin(k * theta) / math.sqrt(math.pi))
        return np.stack(cols, axis=1)
    if dim == 3:
        polar = np.arccos(np.clip(u[:, 2], -1.0, 1.0))
        azim = np.arctan2(u[:, 1], u[:, 0])
        cols = []
        for k in range(k_max + 1):
            for l in range(1, 2 * k + 2):
                m = l - k - 1
                y = special.sph_harm_y(k, abs(m), polar, azim)
                if m == 0:
                    cols.append(y.real)
                elif m > 0:
                    cols.append(math.sqrt(2.0) * y.real)
                else:
                    cols.append(math.sqrt(2.0) * y.imag)
        return np.stack(cols, axis=1)
    raise ValueError(f"harmonic bases are implemented for dim 2 and 3, got {dim}")


@dataclass(frozen=True)
class SphericalBasisElement:
    dim: int
    k: int
    l: int
    d_param: float

    def __post_init__(self) -> None:
        if not 1 <= self.l <= harmonic_count(self.dim, self.k):
            raise ValueError(f"index l={self.l} out of range for degree {self.k}")

    @property
    def bessel_order(self) -> float:
        return bessel_order(self.k, self.d_param)

    def eval(self, directions) -> np.ndarray:
        full = eval_basis(self.dim, self.k, directions)
        start = sum(harmonic_count(self.dim, kk) for kk in range(self.k))
        return full[:, start + self.l - 1]


def sphere_quadrature(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors and weights exact for polynomials of total degree <= degree."""
    if dim == 2:
        n = degree + 1
        theta = 2.0 * math.pi * np.arange(n) / n
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return pts, np.full(n, 2.0 * math.pi / n)
    if dim == 3:
        nt = degree // 2 + 1
        npz = degree + 1
        x, w = np.polynomial.legendre.leggauss(nt)
        az = 2.0 * math.pi * np.arange(npz) / npz
        ct, a = np.meshgrid(x, az, indexing="ij")
        st = np.sqrt(1.0 - ct**2)
        pts = np.stack([(st * np.cos(a)).ravel(), (st * np.sin(a)).ravel(), ct.ravel()], axis=1)
        wts = np.multiply.outer(w, np.full(npz, 2.0 * math.pi / npz)).ravel()
        return pts, wts
    raise ValueError(f"sphere quadrature is implemented for dim 2 and 3, got {dim}")


def nudft(values: np.ndarray, axes: list[np.ndarray], points: np.ndarray, weight: float, chunk: int = 4096):
    """sum_x values(x) exp(-i xi.x) * weight at arbitrary frequencies xi (rows of points).

    ``values`` lives on the tensor product of the 1-D coordinate arrays ``axes``.
    """
    points = np.atleast_2d(points)
    dim = len(axes)
    out = np.empty(points.shape[0], dtype=complex)
    for s in range(0, points.shape[0], chunk):
        p = points[s : s + chunk]
        e = [np.exp(-1j * np.multiply.outer(p[:, a], axes[a])) for a in range(dim)]
        if dim == 1:
            res = e[0] @ values
        elif dim == 2:
            res = np.sum((e[0] @ values) * e[1], axis=1)
        else:
            n1, n2, n3 = values.shape
            t = (e[0] @ values.reshape(n1, n2 * n3)).reshape(-1, n2, n3)
            t = np.einsum("pbc,pb->pc", t, e[1])
            res = np.sum(t * e[2], axis=1)
        out[s : s + chunk] = res * weight
    return out


def field_spectral_function(field: Field, support_tol: float = 0.0):
    """Continuous-frequency Riemann-sum transform of a field plus its physical radius.

    Returns (callable, radius) where radius bounds |x| over the samples kept.
    """
    grid = field.grid
    vals = field.values
    mask = np.abs(vals) > support_tol * (np.abs(vals).max() if vals.size else 0.0)
    if not mask.any():
        return (lambda pts: np.zeros(np.atleast_2d(pts).shape[0], dtype=complex)), 0.0
    ax = grid.axis()
    sub_idx = []
    for a in range(grid.dim):
        other = tuple(b for b in range(grid.dim) if b != a)
        hit = np.nonzero(mask.any(axis=other) if other else mask)[0]
        sub_idx.append(np.arange(hit.min(), hit.max() + 1))
    sub = vals[np.ix_(*sub_idx)]
    axes = [ax[i] for i in sub_idx]
    radius = math.sqrt(sum(max(abs(a[0]), abs(a[-1])) ** 2 for a in axes))

    def spectral(pts):
        return nudft(sub, axes, np.atleast_2d(pts), grid.cell_volume)

    return spectral, radius


def angular_bandwidth(rho: float, radius: float, margin: int = 12) -> int:
    x = rho * radius
    return int(math.ceil(x + margin + 3.0 * x ** (1.0 / 3.0)))


def shell_coefficients(func, dim: int, k_max: int, radii, radius: float, margin: int = 12):
    """Angular coefficients c[s, kl] = int_S func(rho_s theta) b_kl(theta) dtheta.

    Also returns the per-shell squared residual of the truncated expansion.
    """
    radii = np.asarray(radii, dtype=float)
    nb = len(basis_index(dim, k_max))
    coeffs = np.zeros((len(radii), nb), dtype=complex)
    resid2 = np.zeros(len(radii))
    total2 = np.zeros(len(radii))
    orders = np.array([k_max + angular_bandwidth(r, radius, margin) for r in radii])
    for order in np.unique(orders):
        sel = np.nonzero(orders == order)[0]
        pts, wts = sphere_quadrature(dim, int(order))
        basis = eval_basis(dim, k_max, pts)
        allpts = (radii[sel][:, None, None] * pts[None, :, :]).reshape(-1, dim)
        vals = func(allpts).reshape(len(sel), len(wts))
        c = (vals * wts[None, :]) @ basis
        recon = c @ basis.T
        coeffs[sel] = c
        resid2[sel] = np.sum(wts[None, :] * np.abs(vals - recon) ** 2, axis=1)
        total2[sel] = np.sum(wts[None, :] * np.abs(vals) ** 2, axis=1)
    return coeffs, resid2, total2


@dataclass(frozen=True, eq=False)
class AngularDecomposition:
    dim: int
    k_max: int
    entries: list  # (k, l, RadialProfile)
    residual: float  # relative L2 truncation residual
    total_norm: float  # L2 norm of the decomposed function (rho^{dim-1} d rho dtheta)

    def coefficient(self, k: int, l: int) -> RadialProfile:
        for kk, ll, prof in self.entries:
            if (kk, ll) == (k, l):
                return prof
        raise KeyError((k, l))

    def coefficient_norm2(self) -> float:
        return float(sum(p.norm(self.dim) ** 2 for _, _, p in self.entries))


def angular_decompose(
    source,
    k_max: int,
    radial_range: tuple[float, float] | None = None,
    panels: int | None = None,
    order: int = 16,
    radius: float | None = None,
    tol: float = 1e-8,
    dim: int | None = None,
) -> AngularDecomposition:
    """Project a frequency-space function on spheres onto the harmonic basis.

    ``source`` is a Field (decomposed through its Riemann-sum Fourier
    transform) or a callable taking points of shape (P, dim).  Radial nodes are
    composite Gauss-Legendre on ``radial_range``.
    """
    if isinstance(source, Field):
        dim = source.grid.dim
        func, rad = field_spectral_function(source)
        radius = rad if radius is None else radius
        if radial_range is None:
            radial_range = (0.0, source.grid.corner_frequency)
    else:
        if dim is None or radius is None or radial_range is None:
            raise ValueError("callable sources need dim, radius and radial_range")
        func = source
    if dim not in (2, 3):
        raise ValueError(f"angular decomposition needs dim 2 or 3, got {dim}")
    a, b = radial_range
    if panels is None:
        panels = max(4, int(math.ceil((b - a) * max(radius, 1.0) / 4.0)))
    nodes, weights = gauss_legendre(a, b, panels, order)
    coeffs, resid2, total2 = shell_coefficients(func, dim, k_max, nodes, radius)
    jac = weights * nodes ** (dim - 1)
    total = float(np.sqrt(np.sum(jac * total2)))
    resid = float(np.sqrt(np.sum(jac * resid2)))
    rel = resid / total if total > 0 else 0.0
    entries = [
        (k, l, RadialProfile(nodes, weights, coeffs[:, col]))
        for col, (k, l) in enumerate(basis_index(dim, k_max))
    ]
    if rel > tol:
        warnings.warn(
            TruncationWarning(f"angular truncation at k_max={k_max} leaves relative residual {rel:.3e}", rel)
        )
    return AngularDecomposition(dim=dim, k_max=k_max, entries=entries, residual=rel, total_norm=total)
