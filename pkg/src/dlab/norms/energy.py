"""Energy functionals."""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from ..dynamics.nonlinearity import RegularizedNonlinearity
from ..spectral.grid import Field


def kinetic_energy(field: Field) -> float:
    """(1/2) int |grad u|^2, computed spectrally."""
    grid = field.grid
    raw = sfft.fftn(field.values)
    return float(0.5 * np.sum(grid.k2() * np.abs(raw) ** 2) * grid.cell_volume / raw.size)


def energy(field: Field, p: float) -> float:
    """(1/2) int |grad u|^2 + (1/(p+1)) int |u|^{p+1}; 1/(p+1) = (d-2)/(2d) for p = (d+2)/(d-2)."""
    pot = np.sum(np.abs(field.values) ** (p + 1.0)) * field.grid.cell_volume / (p + 1.0)
    return kinetic_energy(field) + float(pot)


def energy_n(field: Field, reg: RegularizedNonlinearity) -> float:
    """(1/2) int |grad v|^2 + (coupling/2) int phi_n(|v|^2)."""
    x = np.abs(field.values) ** 2
    pot = 0.5 * reg.coupling * np.sum(reg.phi(x)) * field.grid.cell_volume
    return kinetic_energy(field) + float(pot)
