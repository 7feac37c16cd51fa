"""Regularized nonlinearity and the split-step solver for the forced equation."""

from .nonlinearity import RegularizedNonlinearity, dg_n, e_n_eval, exponent_for, g_eval, g_n_eval
from .solver import (
    ForcingTerm,
    StepSizeError,
    duhamel_residual,
    extract_scattering_state,
    free_propagate,
    solve_forced,
)
from .trajectory import Trajectory
