import math

import numpy as np
import pytest

from polystrand.diagnostics import (
    DiagnosticsReport,
    bracket_identity_residual,
    convergence_study,
    equivalence_error,
    generator_bracket_exact,
    intrinsic_pp_residuals,
    norms,
    observed_orders,
    reduced_identity_residual,
    reduced_report,
    seeded_generator_forms,
    snapshots_from_reduced,
    snapshots_from_unreduced,
    time_derivative,
    unreduced_report,
)
from polystrand.dynamics import Grid, IntegratorConfig, initial_conditions, integrate_reduced, integrate_unreduced
from polystrand.errors import PreconditionError
from polystrand.charts import strand_chart
from polystrand.identities import random_form


def _runs(params, n, t_end=0.125, kind="fourier", order=2, stride=2):
    g = Grid(n)
    u, r = initial_conditions(kind, g, seed=2, params=params)
    cfg = IntegratorConfig(dt=0.25 * g.ds, t_end=t_end, fd_order=order)
    return (
        integrate_unreduced(params, u, g, cfg, snapshot_stride=stride),
        integrate_reduced(params, r, g, cfg, snapshot_stride=stride),
    )


def test_time_derivative_exact_for_quadratics():
    t = np.linspace(0.0, 1.0, 6)
    np.testing.assert_allclose(time_derivative(3 * t**2 - t, t), 6 * t - 1, atol=1e-12)


@pytest.mark.parametrize("times", [np.array([0.0, 1.0]), np.array([0.0, 0.1, 0.3])])
def test_time_derivative_preconditions(times):
    with pytest.raises(PreconditionError):
        time_derivative(np.zeros_like(times), times)


def test_norms():
    g = Grid(8, 2.0)
    r = np.zeros((2, 8))
    r[1, 3] = -2.0
    assert norms(r, g) == {"sup": 2.0, "l2": pytest.approx(2.0 * math.sqrt(0.25))}


def test_observed_orders():
    ds = [0.1, 0.05, 0.025]
    assert observed_orders(ds, [4e-2, 1e-2, 2.5e-3]) == pytest.approx([2.0, 2.0])
    assert observed_orders(ds, [0.0, 1e-17, 0.0]) == [None, None]
    assert observed_orders(ds, [1e-3, 0.0, 0.0]) == [math.inf, None]


def test_convergence_study_precondition(params):
    with pytest.raises(PreconditionError):
        convergence_study(params, "twist", [32, 16, 64])


def test_convergence_study_equilibrium_is_exact(params):
    table = convergence_study(params, "equilibrium", [16, 32, 64], t_end=0.1, phi=0.4)
    assert table.exact
    assert table.order == [None, None]
    assert max(table.error) <= 1e-12


def test_equivalence_error_requires_matching_runs(params):
    tu, _ = _runs(params, 16)
    _, tr = _runs(params, 32)
    with pytest.raises(PreconditionError):
        equivalence_error(tu, tr, params)


@pytest.mark.parametrize("name", ["ver", "holo_t", "holo_s", "hor"])
def test_pp_residuals_shrink_under_refinement(params, name):
    sups = []
    for n in (32, 64):
        _, tr = _runs(params, n, stride=1)
        sups.append(norms(intrinsic_pp_residuals(params, snapshots_from_reduced(params, tr))[name], tr.grid)["sup"])
    if name == "ver":
        # per-node ver is a time-difference error; it still shrinks with the mesh
        assert sups[1] < sups[0]
    else:
        assert sups[0] / sups[1] > 3.0


@pytest.mark.parametrize("name", ["holo_t", "hor"])
def test_projected_unreduced_run_satisfies_reduced_equations(params, name):
    sups = []
    for n in (32, 64):
        tu, _ = _runs(params, n, stride=1)
        sups.append(np.max(intrinsic_pp_residuals(params, snapshots_from_unreduced(params, tu))[name]))
    assert sups[0] / sups[1] > 3.0


def test_bracket_identity_residual_converges(params):
    form = seeded_generator_forms(1, seed=4)[0]
    sups = []
    for n in (32, 64):
        tu, _ = _runs(params, n, stride=1)
        sups.append(np.max(np.abs(bracket_identity_residual(params, tu, form))))
    assert sups[0] / sups[1] > 3.0


def test_generator_bracket_exact_vanishes_for_fiber_generator(params, rng):
    from polystrand.so3 import exp_so3

    R = exp_so3(rng.normal(size=(10, 3)))
    np.testing.assert_allclose(generator_bracket_exact(params, R, np.array([0.0, 0.0, 1.0])), 0.0, atol=1e-15)


def test_reduced_identity_residual_converges(params):
    f = random_form(strand_chart(), 3)
    sups = []
    for n in (32, 64):
        _, tr = _runs(params, n, stride=1)
        sups.append(np.max(np.abs(reduced_identity_residual(params, snapshots_from_reduced(params, tr), f))))
    assert sups[0] / sups[1] > 3.0


def test_reports_at_equilibrium_are_zero(params):
    tu, tr = _runs(params, 16, kind="equilibrium", stride=1)
    rep = reduced_report(params, tr)
    assert max(v["sup"] for v in rep.pp_residuals.values()) < 1e-12
    assert np.ptp(rep.energy) < 1e-14
    rep = unreduced_report(params, tu, n_forms=2)
    assert max(b["sup"] for b in rep.bracket_residuals) < 1e-8
    assert len(rep.bracket_residuals) == 2


@pytest.mark.parametrize(
    "kw",
    [dict(times=[0.0, 0.0, 1.0]), dict(times=[0.0, 1.0], energy=[1.0, float("nan")])],
)
def test_report_validation(kw):
    with pytest.raises(PreconditionError):
        DiagnosticsReport(**kw).validate()


def test_report_serializes():
    d = DiagnosticsReport(times=[0.0, 1.0], total_mu=[0.0, 0.0]).validate().to_dict()
    assert set(d) >= {"times", "total_mu", "energy", "equivalence_error", "pp_residuals", "convergence"}
