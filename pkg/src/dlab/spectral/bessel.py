"""Bessel functions, radial profiles and the Fourier-Bessel transform.

For f(x) = f0(|x|) b(x/|x|) with b a degree-k spherical harmonic in R^d the
Fourier transform is F0(|xi|) b(xi/|xi|) where

    F0(r) = (2 pi)^{d/2} i^{-k} r^{-(d-2)/2} int_0^inf f0(s) J_nu(r s) s^{d/2} ds,
    nu = (d + 2k - 2) / 2.

Applying the forward map twice gives (2 pi)^d (-1)^k f0.  The ``unitary``
flag drops the (2 pi)^{d/2} factors so that the double application is the
parity (-1)^k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special


class UnderResolvedError(ValueError):
    def __init__(self, message: str, suggested_nodes: int):
        super().__init__(message)
        self.suggested_nodes = suggested_nodes


def bessel_order(k: int, d_param: float) -> float:
    return (d_param + 2 * k - 2) / 2.0


def bessel_j(mu: float, r, method: str = "scipy"):
    """J_mu(r) for mu > -1/2.

    ``method="scipy"`` uses the library routine; ``method="poisson"``
    integrates the Poisson representation
    J_mu(r) = 2 (r/2)^mu / (Gamma(mu + 1/2) sqrt(pi)) int_0^1 cos(r s) (1 - s^2)^{mu - 1/2} ds
    with an algebraic end-point weight.  The Poisson path is meant for
    moderate orders and arguments (cancellation grows with r).
    """
    if not mu > -0.5:
        raise ValueError(f"Bessel order must exceed -1/2, got {mu}")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("Bessel argument must be nonnegative")
    if method == "scipy":
        out = special.jv(mu, r_arr)
    elif method == "poisson":
        out = np.vectorize(lambda x: _poisson(mu, x), otypes=[float])(r_arr)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out) if np.ndim(out) == 0 else out


def _poisson(mu: float, r: float) -> float:
    if r == 0.0:
        return 1.0 if mu == 0 else 0.0
    beta = mu - 0.5
    val, _ = integrate.quad(
        lambda s: math.cos(r * s) * (1.0 + s) ** beta,
        0.0,
        1.0,
        weight="alg",
        wvar=(0.0, beta),
        limit=400,
        epsabs=1e-14,
        epsrel=1e-13,
    )
    logpref = math.log(2.0) + mu * math.log(r / 2.0) - math.lgamma(mu + 0.5) - 0.5 * math.log(math.pi)
    return math.exp(logpref) * val


def gauss_legendre(a: float, b: float, panels: int, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [a, b]."""
    if panels < 1 or order < 1:
        raise ValueError("panels and order must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True, eq=False)
class RadialProfile:
    nodes: np.ndarray
    weights: np.ndarray
    samples: np.ndarray
    support_hint: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        samples = np.asarray(self.samples, dtype=complex)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.shape != samples.shape:
            raise ValueError("nodes, weights and samples must be 1-D arrays of equal length")
        if np.any(nodes <= 0) or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be positive and strictly increasing")
        for name, arr in (("nodes", nodes), ("weights", weights), ("samples", samples)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_function(cls, func, a: float, b: float, panels: int, order: int = 16, support_hint=None):
        nodes, weights = gauss_legendre(a, b, panels, order)
        return cls(nodes, weights, func(nodes), support_hint)

    def with_samples(self, samples) -> "RadialProfile":
        return RadialProfile(self.nodes, self.weights, samples, self.support_hint)

    def norm(self, d_param: float) -> float:
        """L2 norm against r^{d-1} dr."""
        val = np.sum(self.weights * np.abs(self.samples) ** 2 * self.nodes ** (d_param - 1))
        return float(np.sqrt(val))


def fourier_bessel(
    profile: RadialProfile,
    k: int,
    d_param: float,
    direction: str = "forward",
    out_nodes=None,
    out_weights=None,
    unitary: bool = False,
    check: bool = True,
    nodes_per_oscillation: float = 10.0,
) -> RadialProfile:
    if d_param <= 2:
        raise ValueError("d_param must exceed 2")
    if k < 0:
        raise ValueError("degree must be nonnegative")
    if out_nodes is None:
        out_nodes, out_weights = profile.nodes, profile.weights
    out_nodes = np.asarray(out_nodes, dtype=float)
    if out_weights is None:
        out_weights = np.zeros_like(out_nodes)
    s = profile.nodes
    if check:
        span = s[-1] - s[0]
        oscillations = out_nodes.max() * span / (2.0 * np.pi)
        need = int(math.ceil(nodes_per_oscillation * oscillations)) + 1
        if len(s) < need:
            raise UnderResolvedError(
                f"{len(s)} input nodes resolve only {len(s) / max(oscillations, 1e-300):.2f} "
                f"nodes per oscillation of J(r s); use at least {need} nodes",
                need,
            )
    nu = bessel_order(k, d_param)
    kern = special.jv(nu, np.multiply.outer(out_nodes, s))
    integral = kern @ (profile.samples * profile.weights * s ** (d_param / 2.0))
    pref = out_nodes ** (-(d_param - 2.0) / 2.0)
    scale = (2.0 * np.pi) ** (d_param / 2.0)
    if direction == "forward":
        phase = (-1j) ** k
        factor = 1.0 if unitary else scale
    elif direction == "inverse":
        phase = 1j**k
        factor = 1.0 if unitary else 1.0 / scale
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return RadialProfile(out_nodes, out_weights, factor * phase * pref * integral)
