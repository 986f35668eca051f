import numpy as np
import pytest

from polystrand.chart_engine import (
    ChartSpec,
    FdScheme,
    PointR,
    PointU,
    SectionJet,
    bracket_lie_poisson,
    bracket_unreduced,
    check_invariance,
    compatibility_residual,
    curvature_coefficients,
    dkappa_local,
    fd_partials,
    form_value,
    jacobi_defect,
    kappa_local,
    lift_form,
    pp_residuals,
    z_matrix,
    PoissonFormSpec,
)
from polystrand.charts import (
    abelian_toy,
    so3_toy,
    so3_toy_h,
    strand_chart,
    strand_chart_to_unreduced,
    strand_H_chart,
    strand_h_chart,
    strand_reduced_to_chart,
)
from polystrand.diagnostics import generator_bracket_exact
from polystrand.errors import InvalidInput, PreconditionError
from polystrand.identities import sample_points
from polystrand.reduction import kappa_strand
from polystrand.so3 import LEVI_CIVITA, exp_so3, right_jacobian
from polystrand.dynamics import _align_to


@pytest.mark.parametrize("order, degree", [(2, 2), (4, 4)])
def test_fd_partials_exact_on_polynomials(order, degree, rng):
    coef = rng.normal(size=(degree + 1, 2))
    z = rng.normal(size=(5, 2))

    def poly(w):
        return sum(coef[k] * w**k for k in range(degree + 1)).sum(axis=-1)

    exact = np.stack([sum(k * coef[k, j] * z[:, j] ** (k - 1) for k in range(1, degree + 1)) for j in range(2)], -1)
    got = fd_partials(poly, z, [0, 1], FdScheme(h=1e-2, order=order))
    np.testing.assert_allclose(got, exact, atol=1e-9)


@pytest.mark.parametrize("kw", [dict(h=0.0), dict(order=3)])
def test_fd_scheme_validation(kw):
    with pytest.raises(InvalidInput):
        FdScheme(**kw)


def test_jacobi_defect(rng):
    assert jacobi_defect(LEVI_CIVITA) == 0.0
    c = rng.normal(size=(3, 3, 3))
    c = c - np.swapaxes(c, 1, 2)
    assert jacobi_defect(c) > 0.1


def _zero(x, s):
    return np.zeros(np.broadcast_shapes(x.shape[:-1], s.shape[:-1]) + (3, 1))


@pytest.mark.parametrize(
    "c, extra",
    [
        (np.zeros((2, 2, 2)), {}),
        (np.ones((3, 3, 3)), {}),
        (LEVI_CIVITA, {}),  # non-abelian without translate
        (np.zeros((3, 3, 3)), {"compatible": False}),
    ],
)
def test_chart_spec_rejects(c, extra):
    with pytest.raises(InvalidInput):
        ChartSpec(n=1, dF=1, dG=3, c=c, A_x=_zero, A_s=_zero, **extra)


def test_compatible_spec_has_zero_compatibility_residual(rng):
    spec = so3_toy()
    x, s = rng.normal(size=(10, 1)), rng.normal(size=(10, 1))
    assert np.max(np.abs(compatibility_residual(spec, x, s))) < 1e-15


def test_z_matrix_matches_closed_form_right_jacobian(rng):
    spec = so3_toy()
    y = rng.uniform(-1.0, 1.0, (20, 3))
    np.testing.assert_allclose(z_matrix(spec, y), right_jacobian(y), atol=1e-8)


def test_kappa_local_invariant_under_abelian_translation(rng):
    spec = abelian_toy()
    u = sample_points(spec, 50, rng)
    moved = PointU(u.x, u.s, u.y + 0.7, u.pa, u.pg)
    a, b = kappa_local(spec, u), kappa_local(spec, moved)
    np.testing.assert_allclose(a.sigma, b.sigma)
    np.testing.assert_allclose(a.mu, b.mu)


def test_kappa_local_matches_closed_form_reduction_on_strand_chart(rng):
    spec = strand_chart()
    u = sample_points(spec, 200, rng)
    via_chart = kappa_local(spec, u)
    closed = strand_reduced_to_chart(u.x, kappa_strand(strand_chart_to_unreduced(u)))
    np.testing.assert_allclose(via_chart.sigma, closed.sigma, atol=1e-12)
    np.testing.assert_allclose(via_chart.mu, closed.mu, atol=1e-12)


def test_lifted_hamiltonian_matches_unreduced_hamiltonian(params, rng):
    spec = strand_chart()
    u = sample_points(spec, 200, rng)
    np.testing.assert_allclose(strand_h_chart(params)(kappa_local(spec, u)), strand_H_chart(params)(u), atol=1e-12)


def test_unreduced_bracket_of_generator_form(params, rng):
    spec = strand_chart()
    u = sample_points(spec, 100, rng)
    nu = np.array([0.2, -0.5, 0.8])

    def F(pt):
        up = strand_chart_to_unreduced(pt)
        return np.stack([up.p_t @ nu, up.p_s @ nu], axis=-1)

    got = bracket_unreduced(spec, F, strand_H_chart(params), u)
    exact = generator_bracket_exact(params, strand_chart_to_unreduced(u).R, nu)
    np.testing.assert_allclose(got, exact, atol=1e-7)


def test_lie_poisson_term_is_cross_product(rng):
    spec = so3_toy()
    r = PointR(rng.normal(size=(20, 1)), rng.normal(size=(20, 1)), rng.normal(size=(20, 1, 1)), rng.normal(size=(20, 1, 3)))
    xi = rng.normal(size=(20, 3))
    # the toy Hamiltonian is quadratic, so its mu-gradient is available in closed form
    w = np.array([1.0, 2.0, 0.5])
    mu, sig, x, s = r.mu[:, 0], r.sigma[:, 0, 0], r.x[:, 0], r.s[:, 0]
    hmu = w * mu
    hmu[:, 1] += np.cos(x) * sig
    hmu[:, 0] += 0.2 * s * mu[:, 2]
    hmu[:, 2] += 0.2 * s * mu[:, 0]
    expected = np.sum(mu * np.cross(hmu, xi), axis=-1)
    np.testing.assert_allclose(bracket_lie_poisson(spec, xi, so3_toy_h, r), expected, atol=1e-7)


def test_strand_curvature_is_area_form(rng):
    spec = strand_chart()
    x = rng.normal(size=(30, 2))
    s = np.stack([rng.uniform(-1.2, 1.2, 30), rng.uniform(-3, 3, 30)], -1)
    B = curvature_coefficients(spec, x, s)
    np.testing.assert_allclose(B[:, 0, 2, 3], -np.cos(s[:, 0]), atol=1e-8)
    np.testing.assert_allclose(B[:, 0, 3, 2], np.cos(s[:, 0]), atol=1e-8)
    np.testing.assert_allclose(B[:, 0, :2, :], 0.0, atol=1e-8)


def test_dkappa_requires_identity_fiber_point(rng):
    spec = abelian_toy()
    u = sample_points(spec, 3, rng)
    with pytest.raises(PreconditionError):
        dkappa_local(spec, u, u)


def test_check_invariance_detects_non_invariant_function(rng):
    spec = so3_toy()
    u = sample_points(spec, 10, rng, at_identity=True)
    assert np.min(check_invariance(spec, lambda v: v.y[..., 0], u)) > 0.5
    assert np.max(check_invariance(spec, lambda v: so3_toy_h(kappa_local(spec, v)), u)) < 1e-6


def test_lifted_form_agrees_with_reduced_value(rng):
    spec = so3_toy()
    u = sample_points(spec, 20, rng)
    f = PoissonFormSpec(Y=lambda x, s: np.cos(x + s), xi=lambda x, s: np.sin(x) * np.ones(3), omega=lambda x, s: s)
    np.testing.assert_allclose(lift_form(spec, f)(u), form_value(spec, f, kappa_local(spec, u)))


def test_pp_residuals_vanish_at_static_equilibrium(params):
    spec = strand_chart()
    R = _align_to(params.chi)
    zeta = R.T @ np.array([0.0, 0.0, 1.0])
    alpha, beta = np.arcsin(zeta[1]), np.arctan2(-zeta[0], zeta[2])
    r = PointR(np.zeros((1, 2)), np.array([[alpha, beta]]), np.zeros((1, 2, 2)), np.zeros((1, 2, 1)))
    jet = SectionJet(np.zeros((1, 2, 2)), np.zeros((1, 2, 2, 2)), np.zeros((1, 2, 2, 1)))
    ver, holo, hor = pp_residuals(spec, strand_h_chart(params), r, jet)
    assert np.max(np.abs(ver)) == 0.0
    assert np.max(np.abs(holo)) < 1e-9
    assert np.max(np.abs(hor)) < 1e-8
    moved = PointR(r.x, r.s + 0.3, r.sigma, r.mu)
    _, _, hor = pp_residuals(spec, strand_h_chart(params), moved, jet)
    assert np.max(np.abs(hor)) > 1e-2
