"""Randomized checks of the local reduction identities.

Each check samples seeded random chart points, evaluates both sides of an
identity with the chart engine and reports the largest residual.
"""

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .chart_engine import (
    FdScheme,
    PointU,
    PoissonFormSpec,
    bracket_reduced,
    bracket_unreduced,
    check_invariance,
    curvature_lambda_term,
    dh_reduced,
    dh_unreduced,
    dkappa_local,
    fd_partials,
    kappa_local,
    lift_form,
    lift_function,
    z_matrix,
)
from .charts import abelian_toy, abelian_toy_h, so3_toy, so3_toy_h, strand_chart, strand_h_chart
from .strand import StrandParams

DEFAULT_TOL = 1e-5


@dataclass
class IdentityResult:
    name: str
    chart: str
    max_residual: float
    tolerance: float
    runtime: float
    detail: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(np.isfinite(self.max_residual) and self.max_residual <= self.tolerance)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def default_strand_params():
    """Anisotropic tensors with a tilted dipole, used for identity checks."""
    return StrandParams(np.diag([1.0, 2.0, 3.0]), np.diag([2.0, 1.0, 1.0]), 1.0, [0.3, -0.2, 1.0])


def sample_points(spec, count, rng, y_scale=0.5, at_identity=False):
    """Seeded random unreduced chart points; Euler charts keep ``|alpha| < 1.2``."""
    n, dF, dG = spec.n, spec.dF, spec.dG
    x = rng.uniform(-1.0, 1.0, (count, n))
    if spec.name == "strand-euler":
        s = np.stack([rng.uniform(-1.2, 1.2, count), rng.uniform(-np.pi, np.pi, count)], axis=-1)
    else:
        s = rng.uniform(-1.0, 1.0, (count, dF))
    y = np.zeros((count, dG)) if at_identity else rng.uniform(-y_scale, y_scale, (count, dG))
    return PointU(x, s, y, rng.normal(size=(count, n, dF)), rng.normal(size=(count, n, dG)))


def _stack_xs(x, s):
    lead = np.broadcast_shapes(np.shape(x)[:-1], np.shape(s)[:-1])
    return np.concatenate([np.broadcast_to(x, lead + x.shape[-1:]), np.broadcast_to(s, lead + s.shape[-1:])], axis=-1)


def random_form(spec, seed):
    """Smooth affine form with trigonometric coefficients in ``(x, s)``."""
    rng = np.random.default_rng(seed)
    m = spec.n + spec.dF
    a = rng.normal(size=(spec.dF, m))
    b = rng.normal(size=(spec.dG, m))
    w = rng.normal(size=(spec.n, m))
    phase = rng.uniform(0, 2 * np.pi, 3)

    return PoissonFormSpec(
        Y=lambda x, s: np.sin(_stack_xs(x, s) @ a.T + phase[0]),
        xi=lambda x, s: np.cos(_stack_xs(x, s) @ b.T + phase[1]),
        omega=lambda x, s: np.sin(_stack_xs(x, s) @ w.T + phase[2]),
    )


def chart_cases(params=None):
    """``(spec, h)`` pairs for the strand chart and the two toy charts."""
    params = params or default_strand_params()
    return [
        (strand_chart(), strand_h_chart(params)),
        (abelian_toy(), abelian_toy_h),
        (so3_toy(), so3_toy_h),
    ]


def check_bracket_reduction(spec, h, n_points=1000, seed=0, n_forms=1, tol=DEFAULT_TOL):
    """Max over points and forms of ``|{F,H}(u) - {f,h}(kappa(u))|`` with ``F = f o kappa``."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    u = sample_points(spec, n_points, rng)
    r = kappa_local(spec, u)
    H = lift_function(spec, h)
    worst = 0.0
    for k in range(n_forms):
        f = random_form(spec, seed + 1000 + k)
        diff = bracket_unreduced(spec, lift_form(spec, f), H, u) - bracket_reduced(spec, f, h, r)
        worst = max(worst, float(np.max(np.abs(diff))))
    return IdentityResult("bracket_reduction", spec.name, worst, tol, time.perf_counter() - start, {"points": n_points})


def check_dh_reduction(spec, n_points=1000, seed=0, n_forms=1, tol=DEFAULT_TOL):
    """Max of ``|d^h F - kappa^*(d^h f - <mu, B(Y, Lam_bar)>)|``."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    u = sample_points(spec, n_points, rng)
    r = kappa_local(spec, u)
    worst = 0.0
    for k in range(n_forms):
        f = random_form(spec, seed + 2000 + k)
        lhs = dh_unreduced(spec, lift_form(spec, f), u)
        rhs = dh_reduced(spec, f, r) - curvature_lambda_term(spec, f.Y, r)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return IdentityResult("dh_reduction", spec.name, worst, tol, time.perf_counter() - start, {"points": n_points})


def z_derivative_at_identity(spec, outer=FdScheme(h=1e-3, order=4), inner=None):
    """``D[beta, alpha, gamma] = dZ^beta_alpha/dy^gamma`` at ``y = 0`` from the chart map alone."""
    inner = inner or spec.fd
    zero = np.zeros(spec.dG)
    return fd_partials(lambda y: z_matrix(spec, y, inner), zero, np.arange(spec.dG), outer)


def check_bch(spec, tol=DEFAULT_TOL):
    """``max |dZ/dy(0) - c/2|`` with ``D[b, a, g]`` against ``c^b_{a g}/2``."""
    start = time.perf_counter()
    D = z_derivative_at_identity(spec)
    res = float(np.max(np.abs(D - 0.5 * spec.c)))
    return IdentityResult("bch_z_derivative", spec.name, res, tol, time.perf_counter() - start)


def check_abelian_z(spec, n_points=100, seed=0, tol=1e-9):
    """``max |Z(y) - Id|`` for an abelian chart at random ``y``."""
    start = time.perf_counter()
    y = np.random.default_rng(seed).uniform(-2.0, 2.0, (n_points, spec.dG))
    res = float(np.max(np.abs(z_matrix(spec, y) - np.eye(spec.dG))))
    return IdentityResult("abelian_z_identity", spec.name, res, tol, time.perf_counter() - start)


def check_dkappa(spec, n_points=1000, seed=0, tol=DEFAULT_TOL, scheme=FdScheme(h=1e-6, order=2)):
    """Tabulated differential of ``kappa`` against its central-difference Jacobian at ``y = 0``."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    u = sample_points(spec, n_points, rng, at_identity=True)
    z = spec.flat_u(u)
    D = spec.size_u
    basis = np.eye(D)
    # FD Jacobian: (points, size_r, size_u)
    jac = fd_partials(lambda w: spec.flat_r(kappa_local(spec, spec.unflat_u(w))), z, np.arange(D), scheme)
    tab = np.empty_like(jac)
    for k in range(D):
        tangent = spec.unflat_u(np.broadcast_to(basis[k], z.shape))
        tab[..., k] = spec.flat_r(dkappa_local(spec, u, tangent))
    res = float(np.max(np.abs(tab - jac)))
    return IdentityResult("dkappa_table", spec.name, res, tol, time.perf_counter() - start, {"points": n_points})


def check_invariance_of_lift(spec, h, n_points=1000, seed=0, tol=DEFAULT_TOL):
    """Infinitesimal invariance of ``H = h o kappa`` at ``y = 0``."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    u = sample_points(spec, n_points, rng, at_identity=True)
    res = float(np.max(check_invariance(spec, lift_function(spec, h), u)))
    return IdentityResult("invariance", spec.name, res, tol, time.perf_counter() - start, {"points": n_points})


def verify_all(params=None, n_points=1000, seed=0, tol=DEFAULT_TOL):
    """Run every identity check on every chart and return the results."""
    results = []
    for spec, h in chart_cases(params):
        results.append(check_bracket_reduction(spec, h, n_points, seed, tol=tol))
        results.append(check_dh_reduction(spec, n_points, seed, tol=tol))
        results.append(check_dkappa(spec, n_points, seed, tol=tol))
        results.append(check_invariance_of_lift(spec, h, n_points, seed, tol=tol))
        if spec.abelian:
            results.append(check_abelian_z(spec, seed=seed))
        else:
            results.append(check_bch(spec, tol=tol))
    return results
