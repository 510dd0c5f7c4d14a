import numpy as np
import pytest

import klflow


@pytest.fixture
def standard_normal_family():
    """Static N(0, 1) target."""
    return klflow.make_gaussian_path((0.0,), (0.0,), 1.0, 1.0)


@pytest.fixture
def moving_family():
    """Mean sweeps -1 to 1 along a smoothstep ramp on [0, 1], s^2 = 1."""
    return klflow.make_gaussian_path(
        (-1.0,), (1.0,), 1.0, 1.0, schedule="smoothstep", t_lo=0.0, t_hi=1.0
    )


def gaussian_on(grid, mean, sigma_sq, t=0.0):
    """Discretized isotropic Gaussian, renormalized to grid mass 1."""
    m = tuple(np.atleast_1d(mean))
    fam = klflow.make_gaussian_path(m, m, sigma_sq, sigma_sq)
    return klflow.discretize(fam, t, grid)
