import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dlab.spectral import Field, Grid

settings.register_profile(
    "dlab", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("dlab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid1():
    return Grid(1, 32.0, 256)


def band_limited(grid, rng, band, zero_mean=False):
    kn = grid.knorm()
    coeff = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * (kn <= band)
    if zero_mean:
        coeff[(0,) * grid.dim] = 0.0
    return Field.from_spectral(grid, coeff)


def rel_l2(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
