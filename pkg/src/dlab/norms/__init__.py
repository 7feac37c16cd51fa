"""Space-time norms, exponent arithmetic, energies and Strichartz experiments."""

from .energy import energy, energy_n, kinetic_energy
from .spaces import (
    NormProfile,
    NormSpec,
    Partition,
    R,
    Rdot,
    V,
    W,
    Wdot,
    X,
    Y,
    Z,
    admissible_check,
    besov,
    besov_blocks,
    default_s1_pairs,
    derivative_gain,
    endpoint_gain,
    lebesgue,
    make_spec,
    s_d,
    s1_norm,
    s_d_terms,
    spacetime_norm,
    time_partition,
    w_exponents,
    x_interpolation,
)
from .strichartz import (
    RadialDatum,
    RandomizedStrichartz,
    StrichartzStats,
    deterministic_strichartz,
    free_trajectory,
    random_band_limited,
    randomized_strichartz_experiment,
    recurrence_time,
)
