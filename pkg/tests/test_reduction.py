import numpy as np
import pytest

from polystrand.errors import PreconditionError
from polystrand.reduction import (
    curvature_pairing,
    horizontal_lift,
    kappa_strand,
    lift_point,
    mech_connection,
    project_sphere,
    reconstruct_momentum,
    reconstruct_rotation_field,
    tangent_projection,
)
from polystrand.so3 import E1, E2, E3, exp_so3
from polystrand.strand import ReducedPoint, UnreducedPoint
from conftest import random_rotations


@pytest.fixture
def point(rng):
    R = random_rotations(rng, 100)
    return UnreducedPoint(R, rng.normal(size=(100, 3)), rng.normal(size=(100, 3)))


def test_project_sphere_is_unit(rotations):
    np.testing.assert_allclose(np.linalg.norm(project_sphere(rotations), axis=-1), 1.0, atol=1e-14)


def test_kappa_output_is_tangent(point):
    r = kappa_strand(point)
    np.testing.assert_allclose(np.sum(r.zeta * r.sigma_t, -1), 0.0, atol=1e-13)
    np.testing.assert_allclose(np.sum(r.zeta * r.sigma_s, -1), 0.0, atol=1e-13)


def test_lift_inverts_kappa(point):
    back = lift_point(point.R, kappa_strand(point))
    np.testing.assert_allclose(back.p_t, point.p_t, atol=1e-12)
    np.testing.assert_allclose(back.p_s, point.p_s, atol=1e-12)


def test_mu_is_fiber_momentum(point):
    # mu is the e3 component of the spatial momentum, the momentum map of the fiber rotation
    np.testing.assert_allclose(kappa_strand(point).mu_t, point.p_t[:, 2], atol=1e-13)


def test_kappa_is_invariant_under_fiber_rotation(point, rng):
    G = exp_so3(rng.uniform(-3, 3, (100, 1)) * E3)
    moved = UnreducedPoint(G @ point.R, np.einsum("nij,nj->ni", G, point.p_t), np.einsum("nij,nj->ni", G, point.p_s))
    a, b = kappa_strand(point), kappa_strand(moved)
    for name in ("zeta", "sigma_t", "sigma_s", "mu_t", "mu_s"):
        np.testing.assert_allclose(getattr(a, name), getattr(b, name), atol=1e-12)


def test_horizontal_lift_is_horizontal_and_projects_back(rotations, rng):
    zeta = project_sphere(rotations)
    v = rng.normal(size=zeta.shape)
    v -= np.sum(v * zeta, -1, keepdims=True) * zeta
    w = horizontal_lift(rotations, v)
    np.testing.assert_allclose(mech_connection(w), 0.0, atol=1e-13)
    np.testing.assert_allclose(tangent_projection(rotations, w), v, atol=1e-12)


def test_tangent_projection_matches_derivative_of_projection(rng):
    R = random_rotations(rng, 1)[0]
    w = rng.normal(size=3)
    h = 1e-6
    fd = (project_sphere(exp_so3(h * w) @ R) - project_sphere(exp_so3(-h * w) @ R)) / (2 * h)
    np.testing.assert_allclose(tangent_projection(R, w), fd, atol=1e-9)


def test_curvature_pairing_values():
    assert curvature_pairing(E3, E1, E2) == pytest.approx(-1.0)
    assert curvature_pairing(E3, E2, E1) == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        curvature_pairing(E3, E3, E1)


def test_curvature_equals_fiber_part_of_lift_bracket(rng):
    # For horizontal lifts X, Y of sphere vectors, the connection of [X, Y]
    # (spatial vector fields w -> w x R) is minus the curvature.
    R = random_rotations(rng, 1)[0]
    zeta = project_sphere(R)
    a, b = (v - np.dot(v, zeta) * zeta for v in rng.normal(size=(2, 3)))
    X, Y = horizontal_lift(R, a), horizontal_lift(R, b)
    # right-invariant fields with constant spatial generators have bracket -[X, Y]
    assert mech_connection(-np.cross(X, Y)) == pytest.approx(curvature_pairing(zeta, a, b), abs=1e-12)


def test_reconstruct_momentum_projects_small_drift():
    sigma = np.array([1.0, 0.0, 1e-9])
    np.testing.assert_allclose(reconstruct_momentum(E3, sigma, 2.0), [0.0, -1.0, 2.0], atol=1e-15)
    with pytest.raises(PreconditionError):
        reconstruct_momentum(E3, np.array([1.0, 0.0, 1e-3]), 0.0)


def test_lift_point_requires_matching_base(rng):
    r = ReducedPoint(E1, np.zeros(3), np.zeros(3), 0.0, 0.0)
    with pytest.raises(PreconditionError):
        lift_point(np.eye(3), r)


def test_reconstruct_rotation_field_is_exact_for_constant_velocity(rng):
    R0 = random_rotations(rng, 20)
    w = rng.normal(size=(20, 3))
    zeta = project_sphere(R0)
    zeta_t = np.cross(zeta, np.einsum("nji,nj->ni", R0, w))
    R1 = reconstruct_rotation_field(zeta, zeta_t, w[:, 2], R0, 0.1)
    np.testing.assert_allclose(R1, exp_so3(0.1 * w) @ R0, atol=1e-13)
