from .grid import Field, Grid, apply_multiplier, gradient, grad_abs, inner, laplacian, transform
from .cutoffs import (
    EmptyBandWarning,
    PartitionOfUnity,
    UnitPartition,
    dyadic_band,
    dyadic_multiplier,
    dyadic_project,
    low_pass,
    low_pass_multiplier,
    make_partition,
    make_unit_partition,
    smooth_step,
    unit_project,
)
from .bessel import RadialProfile, UnderResolvedError, bessel_j, bessel_order, fourier_bessel, gauss_legendre
from .angular import (
    AngularDecomposition,
    SphericalBasisElement,
    TruncationWarning,
    angular_decompose,
    basis_index,
    eval_basis,
    harmonic_count,
    sphere_quadrature,
)
