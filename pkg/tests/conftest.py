import numpy as np
import pytest

from rbflow.rbf import RbfState, ScaleMap
from rbflow.rng import substream


@pytest.fixture
def rng():
    return substream(1234, "tests")


def random_state(rng, n_basis, dim, n_fields=1, scale_map=None, coeff_scale=1.0):
    """Well-conditioned random expansion: scales around 1, centers in [-1, 1]."""
    scale_map = scale_map or ScaleMap()
    coeffs = coeff_scale * rng.standard_normal((n_fields, n_basis))
    centers = rng.uniform(-1.0, 1.0, size=(n_basis, dim))
    scales = rng.uniform(0.5, 2.0, size=(n_basis, dim))
    return RbfState.from_scales(coeffs, centers, scales, scale_map)


def random_dot(rng, state):
    """Random parameter-velocity record shaped like ``state``."""
    return RbfState(rng.standard_normal(state.coeffs.shape),
                    rng.standard_normal(state.centers.shape),
                    rng.standard_normal(state.scales_raw.shape),
                    state.scale_map)
