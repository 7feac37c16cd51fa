"""Pure-power nonlinearity g(u) = u|u|^{p-1} and its smooth truncations g_n.

The truncation profile phi_n acts on x = |u|^2 with

    phi_n'(x) = x^a                for x <= n^2,       a = (p - 1) / 2
    phi_n'(x) = (2n)^{p-1}         for x >= 4 n^2

and a log-log blend in between, built once at n = 1 and rescaled by
phi_n'(x) = n^{p-1} phi_1'(x / n^2).  In the variables X = log y, y = x / n^2
the blend reads

    log phi_1'(y) = a (X + h D(X / h)),   h = log 4,

with D a degree-7 polynomial vanishing to third order at 0 and with D(1) = 0,
D'(1) = -1, D''(1) = 0.  Wherever the blend would rise above x^a it is
clamped to x^a, which keeps phi_n' <= x^a pointwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from ..spectral.grid import Field

_H = math.log(4.0)
_ALPHA, _BETA = 16.0, 18.0
_T = Polynomial([0.0, 1.0])
_D = _T**3 * (1 - _T) * ((4 - 3 * _T) - (1 - _T) ** 2 * (_ALPHA + _BETA * _T))
_DD = _D.deriv()
# the blend crosses x^a here; above it the profile is clamped to the power law
_T_CLAMP = brentq(lambda t: float(((4 - 3 * t) - (1 - t) ** 2 * (_ALPHA + _BETA * t))), 0.5, 0.99)
_Y_CLAMP = 4.0**_T_CLAMP
_GL_X, _GL_W = np.polynomial.legendre.leggauss(40)


def exponent_for(d_param: float) -> float:
    if not d_param > 2:
        raise ValueError(f"d_param must exceed 2, got {d_param}")
    return (d_param + 2.0) / (d_param - 2.0)


@dataclass(frozen=True)
class RegularizedNonlinearity:
    n: int
    p: float
    coupling: float = 1.0

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"truncation level must be a positive integer, got {self.n}")
        if not self.p > 1:
            raise ValueError(f"exponent p must exceed 1, got {self.p}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", float(self.p))

    @classmethod
    def for_dimension(cls, n: int, d_param: float, coupling: float = 1.0) -> "RegularizedNonlinearity":
        return cls(n, exponent_for(d_param), coupling)

    @property
    def a(self) -> float:
        return 0.5 * (self.p - 1.0)

    @property
    def d_param(self) -> float:
        return 2.0 * (self.p + 1.0) / (self.p - 1.0)

    @property
    def saturation(self) -> float:
        return (2.0 * self.n) ** (self.p - 1.0)

    def branches(self, x: np.ndarray):
        """Masks (power, blend, clamped, saturated) on x = |u|^2; they partition x >= 0."""
        n2 = float(self.n) ** 2
        power = x <= n2
        sat = x >= 4.0 * n2
        clamp = (x >= _Y_CLAMP * n2) & ~sat
        blend = ~(power | sat | clamp)
        return power, blend, clamp, sat

    def _blend_log(self, y: np.ndarray) -> np.ndarray:
        t = np.log(y) / _H
        return self.a * (np.log(y) + _H * _D(t))

    def dphi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        power, blend, clamp, sat = self.branches(x)
        out = np.empty_like(x)
        out[power | clamp] = x[power | clamp] ** self.a
        out[sat] = self.saturation
        if blend.any():
            y = x[blend] / self.n**2
            out[blend] = self.n ** (self.p - 1.0) * np.exp(self._blend_log(y))
        return out

    def ddphi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        power, blend, clamp, sat = self.branches(x)
        out = np.zeros_like(x)
        pw = power | clamp
        with np.errstate(divide="ignore"):
            out[pw] = self.a * x[pw] ** (self.a - 1.0)
        if blend.any():
            xb = x[blend]
            t = np.log(xb / self.n**2) / _H
            out[blend] = self.dphi(xb) * self.a * (1.0 + _DD(t)) / xb
        return out

    def x_ddphi(self, x) -> np.ndarray:
        """x * phi_n''(x), finite at x = 0 even when a < 1."""
        x = np.asarray(x, dtype=float)
        power, blend, clamp, sat = self.branches(x)
        out = np.zeros_like(x)
        pw = power | clamp
        out[pw] = self.a * x[pw] ** self.a
        if blend.any():
            t = np.log(x[blend] / self.n**2) / _H
            out[blend] = self.dphi(x[blend]) * self.a * (1.0 + _DD(t))
        return out

    @cached_property
    def _phi1_at_clamp(self) -> float:
        return float(self._phi1_blend(np.array([_Y_CLAMP]))[0])

    def _phi1_blend(self, y: np.ndarray) -> np.ndarray:
        # phi_1(y) = phi_1(1) + int_0^{log y} exp(Y(X) + X) dX
        top = np.log(y)
        xs = 0.5 * top[:, None] * (_GL_X[None, :] + 1.0)
        vals = np.exp(self.a * (xs + _H * _D(xs / _H)) + xs)
        return 2.0 / (self.p + 1.0) + 0.5 * top * (vals @ _GL_W)

    def phi(self, x) -> np.ndarray:
        """phi_n(x) = int_0^x phi_n', so phi_n(x) = 2 x^{(p+1)/2} / (p+1) for x <= n^2."""
        x = np.asarray(x, dtype=float)
        power, blend, clamp, sat = self.branches(x)
        n, p = float(self.n), self.p
        b = 0.5 * (p + 1.0)
        scale = n ** (p + 1.0)
        out = np.empty_like(x)
        out[power] = 2.0 * x[power] ** b / (p + 1.0)
        if blend.any():
            out[blend] = scale * self._phi1_blend(x[blend] / n**2)
        xc = _Y_CLAMP * n**2
        at_clamp = scale * self._phi1_at_clamp
        out[clamp] = at_clamp + 2.0 * (x[clamp] ** b - xc**b) / (p + 1.0)
        at_sat = at_clamp + 2.0 * ((4.0 * n**2) ** b - xc**b) / (p + 1.0)
        out[sat] = at_sat + self.saturation * (x[sat] - 4.0 * n**2)
        return out

    def defect(self, x) -> np.ndarray:
        """e_n on x = |u|^2, evaluated branch by branch so it is exactly 0 where phi_n' = x^a."""
        x = np.asarray(x, dtype=float)
        power, blend, clamp, sat = self.branches(x)
        out = np.zeros_like(x)
        out[sat] = (self.p - 1.0) * self.saturation
        if blend.any():
            xb = x[blend]
            t = np.log(xb / self.n**2) / _H
            out[blend] = (self.p - 1.0) * self.dphi(xb) * (-_DD(t))
        return out


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, Field) else np.asarray(u, dtype=complex)


def _wrap(u, vals):
    return Field(u.grid, vals) if isinstance(u, Field) else vals


def g_eval(u, p: float):
    """u |u|^{p-1}, accepting a Field or an array."""
    v = _values(u)
    return _wrap(u, v * (np.abs(v) ** 2) ** (0.5 * (p - 1.0)))


def g_n_eval(u, reg: RegularizedNonlinearity):
    """coupling * u * phi_n'(|u|^2).  Equals g_eval bitwise where |u| <= n and coupling is 1."""
    v = _values(u)
    out = v * reg.dphi(np.abs(v) ** 2)
    if reg.coupling != 1.0:
        out = reg.coupling * out
    return _wrap(u, out)


def e_n_eval(u, reg: RegularizedNonlinearity):
    v = _values(u)
    return _wrap(u, reg.defect(np.abs(v) ** 2).astype(complex))


def dg_n(u, reg: RegularizedNonlinearity) -> tuple[np.ndarray, np.ndarray]:
    """Wirtinger derivatives (d_z g_n, d_zbar g_n) = (phi' + |u|^2 phi'', u^2 phi'')."""
    v = _values(u)
    x = np.abs(v) ** 2
    xdd = reg.x_ddphi(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        # u^2 phi'' = (u / ubar) x phi''
        u2dd = np.where(x > 0, v * v / np.where(x > 0, x, 1.0) * xdd, 0.0)
    return reg.coupling * (reg.dphi(x) + xdd), reg.coupling * u2dd
