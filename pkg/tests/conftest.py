import numpy as np
import pytest

from polystrand.so3 import exp_so3
from polystrand.strand import StrandParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params():
    """Anisotropic tensors with a tilted dipole."""
    return StrandParams(np.diag([1.0, 2.0, 3.0]), np.diag([2.0, 1.0, 1.0]), 1.0, [0.3, -0.2, 1.0])


@pytest.fixture
def full_params(rng):
    """Non-diagonal SPD tensors."""
    A = rng.normal(size=(3, 3))
    B = rng.normal(size=(3, 3))
    return StrandParams(A @ A.T + 3 * np.eye(3), B @ B.T + 3 * np.eye(3), 0.7, rng.normal(size=3))


def random_rotations(rng, count):
    v = rng.normal(size=(count, 3))
    v *= (rng.uniform(0.0, 3.0, count) / np.linalg.norm(v, axis=-1))[:, None]
    return exp_so3(v)


@pytest.fixture
def rotations(rng):
    return random_rotations(rng, 200)
