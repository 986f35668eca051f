import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from polystrand.errors import InvalidInput, NearCutLocus, OrientationFlip, PreconditionError
from polystrand.so3 import (
    E3,
    LEVI_CIVITA,
    SpdTensor,
    as_rotation,
    exp_so3,
    hat,
    left_jacobian,
    left_jacobian_inv,
    log_so3,
    project_to_so3,
    require_tangent,
    require_unit,
    right_jacobian,
    rotation_error,
    spd_solve,
    vee,
)

vec3 = arrays(np.float64, 3, elements=st.floats(-3.0, 3.0, allow_nan=False))


@given(vec3, vec3)
def test_hat_is_cross_product(v, w):
    np.testing.assert_allclose(hat(v) @ w, np.cross(v, w), atol=1e-12)


@given(vec3)
def test_vee_inverts_hat(v):
    np.testing.assert_array_equal(vee(hat(v)), v)


def test_vee_rejects_symmetric_part():
    with pytest.raises(InvalidInput):
        vee(np.eye(3))


def test_hat_rejects_wrong_shape():
    with pytest.raises(InvalidInput):
        hat(np.zeros(4))


def test_levi_civita_matches_cross():
    a, b = np.array([1.0, 2.0, 3.0]), np.array([-1.0, 0.5, 2.0])
    np.testing.assert_allclose(np.einsum("ijk,j,k->i", LEVI_CIVITA, a, b), np.cross(a, b))


@given(vec3)
def test_exp_is_rotation(v):
    R = exp_so3(v)
    assert rotation_error(R) < 1e-13
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


@given(arrays(np.float64, 3, elements=st.floats(-1.7, 1.7, allow_nan=False)))
def test_log_inverts_exp(v):
    np.testing.assert_allclose(log_so3(exp_so3(v)), v, atol=1e-10)


@pytest.mark.parametrize("theta", [0.0, 1e-9, 1e-4, 9.99e-3, 1.001e-2, 0.5])
def test_small_angle_branch_is_continuous(theta):
    v = theta * np.array([0.6, 0.0, 0.8])
    # truncated power series of the matrix exponential
    K = hat(v)
    ref = np.eye(3)
    term = np.eye(3)
    for k in range(1, 25):
        term = term @ K / k
        ref = ref + term
    np.testing.assert_allclose(exp_so3(v), ref, atol=1e-15)
    np.testing.assert_allclose(log_so3(ref), v, atol=1e-13)


def test_log_near_pi_raises():
    with pytest.raises(NearCutLocus):
        log_so3(exp_so3((np.pi - 1e-8) * E3))


def test_left_jacobian_matches_finite_differences(rng):
    v = rng.normal(size=3)
    R = exp_so3(v)
    h = 1e-6
    for k in range(3):
        w = np.eye(3)[k]
        dR = (exp_so3(v + h * w) - exp_so3(v - h * w)) / (2 * h)
        np.testing.assert_allclose(vee(dR @ R.T, tol=1e-8), left_jacobian(v) @ w, atol=1e-8)
        np.testing.assert_allclose(vee(R.T @ dR, tol=1e-8), right_jacobian(v) @ w, atol=1e-8)


@given(vec3)
def test_left_jacobian_inverse(v):
    np.testing.assert_allclose(left_jacobian_inv(v) @ left_jacobian(v), np.eye(3), atol=1e-9)


def test_project_to_so3_recovers_rotation(rng):
    R = exp_so3(rng.normal(size=3))
    P = project_to_so3(R + 1e-4 * rng.normal(size=(3, 3)))
    assert rotation_error(P) < 1e-14
    assert np.max(np.abs(P - R)) < 1e-3


def test_project_to_so3_rejects_reflection():
    with pytest.raises(OrientationFlip):
        project_to_so3(np.diag([1.0, 1.0, -1.0]))


@pytest.mark.parametrize("bad", [np.diag([1.0, 1.0, 2.0]), np.diag([1.0, 1.0, -1.0]), np.full((3, 3), np.nan)])
def test_as_rotation_rejects(bad):
    with pytest.raises(InvalidInput):
        as_rotation(bad)


def test_spd_tensor_from_diagonal_triple():
    T = SpdTensor([1.0, 2.0, 4.0])
    np.testing.assert_allclose(T.inverse, np.diag([1.0, 0.5, 0.25]))
    np.testing.assert_allclose(spd_solve(T, np.ones((5, 3))), np.tile([1.0, 0.5, 0.25], (5, 1)))
    assert not T.is_isotropic()
    assert SpdTensor.identity().is_isotropic()


@pytest.mark.parametrize(
    "m",
    [np.diag([1.0, 0.0, 1.0]), np.diag([1.0, -2.0, 1.0]), np.array([[1.0, 0.5, 0], [0, 1, 0], [0, 0, 1]]), np.eye(2)],
)
def test_spd_tensor_rejects(m):
    with pytest.raises(InvalidInput):
        SpdTensor(m)


def test_require_unit_and_tangent():
    with pytest.raises(PreconditionError):
        require_unit(np.array([0.0, 0.0, 1.1]))
    with pytest.raises(PreconditionError):
        require_tangent(E3, np.array([0.0, 0.0, 1.0]))
    require_tangent(E3, np.array([1.0, 2.0, 0.0]))
