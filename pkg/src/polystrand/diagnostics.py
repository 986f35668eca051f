"""Residuals, conservation checks and refinement studies for strand runs.

Time derivatives along snapshots use central differences in the interior
and one-sided second-order stencils at the two ends, so every residual is
``O(dt^2 + ds^2)``.  Snapshots must be equally spaced in time.
"""

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .chart_engine import SectionJet, bracket_unreduced, dh_unreduced, reduced_identity_local
from .charts import (
    strand_chart,
    strand_chart_to_unreduced,
    strand_H_chart,
    strand_h_chart,
    strand_reduced_to_chart,
    strand_unreduced_to_chart,
)
from .dynamics import (
    Grid,
    IntegratorConfig,
    derived_p_s,
    derived_reduced_s,
    energy_reduced,
    energy_unreduced,
    initial_conditions,
    integrate_reduced,
    integrate_unreduced,
    reduce_field,
    spatial_deriv,
    total_mu,
)
from .errors import PreconditionError
from .reduction import kappa_strand
from .strand import ReducedPoint, UnreducedPoint


def time_derivative(values, times):
    """Second-order derivative along axis 0 for equally spaced ``times``."""
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise PreconditionError("need at least three snapshots for a time derivative")
    dts = np.diff(times)
    h = dts[0]
    if np.max(np.abs(dts - h)) > 1e-9 * max(abs(h), 1.0):
        raise PreconditionError("snapshots are not equally spaced in time")
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2 * h)
    out[0] = (-3 * values[0] + 4 * values[1] - values[2]) / (2 * h)
    out[-1] = (3 * values[-1] - 4 * values[-2] + values[-3]) / (2 * h)
    return out


def _space_derivative(values, grid, order=2):
    """Spatial derivative on the node axis (axis 1) of a ``(T, N, ...)`` array."""
    return np.stack([spatial_deriv(v, grid, order) for v in values])


def norms(residual, grid):
    """Sup norm and discrete L2 norm over the grid (per snapshot, then max over time)."""
    r = np.asarray(residual, dtype=float)
    if r.ndim > 2:
        r = np.linalg.norm(r.reshape(r.shape[:2] + (-1,)), axis=-1)
    sup = float(np.max(np.abs(r)))
    l2 = float(np.max(np.sqrt(np.sum(r**2, axis=-1) * grid.ds)))
    return {"sup": sup, "l2": l2}


# --------------------------------------------------------------------------
# snapshot bundles


@dataclass(frozen=True)
class ReducedSnapshots:
    """Reduced section sampled on the grid, including the s-momenta."""

    times: np.ndarray
    grid: Grid
    zeta: np.ndarray
    sigma_t: np.ndarray
    mu_t: np.ndarray
    sigma_s: np.ndarray
    mu_s: np.ndarray
    xi: np.ndarray


def snapshots_from_reduced(params, traj):
    """Attach ``(sigma_s, mu_s)`` rebuilt from ``(zeta, xi)`` to a reduced trajectory."""
    f = traj.field
    order = traj.config.fd_order
    sig_s, mu_s = [], []
    for k in range(len(traj)):
        _, a, b = derived_reduced_s(params, traj.at(k), traj.grid, order)
        sig_s.append(a)
        mu_s.append(b)
    return ReducedSnapshots(traj.times, traj.grid, f.zeta, f.sigma_t, f.mu_t, np.stack(sig_s), np.stack(mu_s), f.xi)


def snapshots_from_unreduced(params, traj):
    """Project an unreduced trajectory with ``kappa_strand`` using the derived ``p_s``."""
    order = traj.config.fd_order
    parts = []
    for k in range(len(traj)):
        fld = traj.at(k)
        p_s = derived_p_s(params, fld, traj.grid, order)
        r = kappa_strand(UnreducedPoint(fld.R, fld.p_t, p_s))
        xi = reduce_field(params, fld, traj.grid, order).xi
        parts.append((r.zeta, r.sigma_t, r.mu_t, r.sigma_s, r.mu_s, xi))
    cols = [np.stack(c) for c in zip(*parts)]
    return ReducedSnapshots(traj.times, traj.grid, *cols)


# --------------------------------------------------------------------------
# bracket identities along solutions


@dataclass(frozen=True)
class GeneratorTestForm:
    """Test form ``F^i = <p^i, nu>`` for the vertical field generated by a constant ``nu``."""

    nu: np.ndarray


def seeded_generator_forms(count, seed=0):
    rng = np.random.default_rng(seed)
    return [GeneratorTestForm(v / np.linalg.norm(v)) for v in rng.normal(size=(count, 3))]


def _chart_points_unreduced(params, traj):
    grid = traj.grid
    T = len(traj)
    x = np.stack(np.broadcast_arrays(traj.times[:, None], grid.s[None, :]), axis=-1)
    p_s = np.stack([derived_p_s(params, traj.at(k), grid, traj.config.fd_order) for k in range(T)])
    up = UnreducedPoint(traj.field.R, traj.field.p_t, p_s)
    return strand_unreduced_to_chart(x, up), p_s


def bracket_identity_residual(params, traj, testform):
    """Residual ``{F,H} - [d_t F^t + d_s F^s] + d^h F`` along an unreduced run.

    The bracket and horizontal differential are evaluated by the chart engine
    in Euler-angle coordinates; the total derivative uses finite differences
    along the discrete solution.  Returns an array of shape ``(T, N)``.
    """
    if len(traj) < 3:
        raise PreconditionError("bracket identity needs at least three snapshots")
    spec = strand_chart()
    nu = np.asarray(testform.nu, dtype=float)
    u, p_s = _chart_points_unreduced(params, traj)

    def F(pt):
        up = strand_chart_to_unreduced(pt)
        return np.stack([up.p_t @ nu, up.p_s @ nu], axis=-1)

    H = strand_H_chart(params)
    bracket = bracket_unreduced(spec, F, H, u)
    dh = dh_unreduced(spec, F, u)
    Ft = traj.field.p_t @ nu
    Fs = p_s @ nu
    total = time_derivative(Ft, traj.times) + _space_derivative(Fs, traj.grid, traj.config.fd_order)
    return bracket - total + dh


def generator_bracket_exact(params, R, nu):
    """Closed form ``{F,H} = e <nu, e3 x R chi>`` for a generator test form."""
    Rchi = R @ params.chi
    e3xRchi = np.stack([-Rchi[..., 1], Rchi[..., 0], np.zeros_like(Rchi[..., 0])], axis=-1)
    return params.e * (e3xRchi @ np.asarray(nu, dtype=float))


def _reduced_chart_section(params, snaps, order):
    """Chart points and first jets of a reduced section on the ``(t, s)`` grid."""
    grid = snaps.grid
    x = np.stack(np.broadcast_arrays(snaps.times[:, None], grid.s[None, :]), axis=-1)
    rp = ReducedPoint(snaps.zeta, snaps.sigma_t, snaps.sigma_s, snaps.mu_t, snaps.mu_s)
    r = strand_reduced_to_chart(x, rp)
    s_unwrapped = np.unwrap(np.unwrap(r.s, axis=0), axis=1)

    def grad(a):
        return np.stack([time_derivative(a, snaps.times), _space_derivative(a, grid, order)], axis=2)

    d_s = grad(s_unwrapped)  # (T, N, i, a)
    d_sigma = grad(r.sigma)  # (T, N, i, j, a)
    d_mu = grad(r.mu)
    return r, SectionJet(d_s=d_s, d_pa=d_sigma, d_pg=d_mu)


def reduced_identity_residual(params, snaps, testform, order=2):
    """Residual of the reduced bracket identity (with curvature correction) along a reduced section.

    ``testform`` is a :class:`~polystrand.chart_engine.PoissonFormSpec` on the
    Euler chart, i.e. functions of ``x = (t, s)`` and ``(alpha, beta)``.
    Returns ``(T, N)``.
    """
    if snaps.times.size < 3:
        raise PreconditionError("reduced identity needs at least three snapshots")
    r, jet = _reduced_chart_section(params, snaps, order)
    return reduced_identity_local(strand_chart(), testform, strand_h_chart(params), r, jet)


def intrinsic_pp_residuals(params, snaps, order=2):
    """Per-node residuals of the four reduced field equations.

    Returns a dict of ``(T, N)`` arrays (vectors reduced to Euclidean norms):
    ``ver = d_t mu_t + d_s mu_s``, ``holo_t``, ``holo_s`` and the tangent part
    of ``hor = d_t sigma_t + d_s sigma_s + eta zeta x sigma_t + xi zeta x sigma_s + e chi_par``.
    """
    grid, times = snaps.grid, snaps.times
    zeta = snaps.zeta
    Iinv, Jinv = params.I.inverse, params.J.inverse
    P_t = snaps.mu_t[..., None] * zeta - np.cross(zeta, snaps.sigma_t)
    P_s = snaps.mu_s[..., None] * zeta - np.cross(zeta, snaps.sigma_s)
    Om_t = P_t @ Iinv.T
    Om_s = -(P_s @ Jinv.T)
    eta = np.sum(zeta * Om_t, -1)
    xi = np.sum(zeta * Om_s, -1)

    ver = time_derivative(snaps.mu_t, times) + _space_derivative(snaps.mu_s, grid, order)
    holo_t = time_derivative(zeta, times) - np.cross(zeta, Om_t)
    holo_s = _space_derivative(zeta, grid, order) - np.cross(zeta, Om_s)
    chi_par = params.chi - zeta * (zeta @ params.chi)[..., None]
    hor = (
        time_derivative(snaps.sigma_t, times)
        + _space_derivative(snaps.sigma_s, grid, order)
        + eta[..., None] * np.cross(zeta, snaps.sigma_t)
        + xi[..., None] * np.cross(zeta, snaps.sigma_s)
        + params.e * chi_par
    )
    hor = hor - np.sum(hor * zeta, -1, keepdims=True) * zeta
    return {
        "ver": ver,
        "holo_t": np.linalg.norm(holo_t, axis=-1),
        "holo_s": np.linalg.norm(holo_s, axis=-1),
        "hor": np.linalg.norm(hor, axis=-1),
    }


# --------------------------------------------------------------------------
# comparisons and refinement


def equivalence_error(unreduced_traj, reduced_traj, params):
    """Per-snapshot sup distance between the projected unreduced run and the reduced run.

    Distances: chordal for ``zeta``, Euclidean for ``sigma_t``, absolute for ``mu_t``.
    """
    a, b = unreduced_traj, reduced_traj
    if a.grid != b.grid or a.times.shape != b.times.shape or np.max(np.abs(a.times - b.times), initial=0) > 1e-12:
        raise PreconditionError("runs do not share grid and snapshot times")
    if a.config.step_size != b.config.step_size:
        raise PreconditionError("runs do not share the time step")
    proj = reduce_field(params, a.field, a.grid, a.config.fd_order)
    red = b.field
    dz = np.max(np.linalg.norm(proj.zeta - red.zeta, axis=-1), axis=-1)
    dsig = np.max(np.linalg.norm(proj.sigma_t - red.sigma_t, axis=-1), axis=-1)
    dmu = np.max(np.abs(proj.mu_t - red.mu_t), axis=-1)
    return np.maximum(np.maximum(dz, dsig), dmu)


@dataclass
class ConvergenceTable:
    n_s: List[int]
    ds: List[float]
    error: List[float]
    order: List[Optional[float]]
    exact: bool
    runtime: float

    def min_order(self):
        vals = [o for o in self.order if o is not None]
        return min(vals) if vals else math.inf


# errors at or below this floor are roundoff and count as exact
EXACT_FLOOR = 1e-12


def observed_orders(ds, errors, floor=EXACT_FLOOR):
    """``log(e_k / e_k+1) / log(ds_k / ds_k+1)``; ``None`` when both errors are below ``floor``."""
    out = []
    for k in range(len(errors) - 1):
        e0, e1 = errors[k], errors[k + 1]
        if e0 <= floor and e1 <= floor:
            out.append(None)
        elif e1 <= floor:
            out.append(math.inf)
        else:
            out.append(math.log(e0 / e1) / math.log(ds[k] / ds[k + 1]))
    return out


def convergence_study(params, kind, n_s_list, cfl=0.25, t_end=1.0, fd_order=2, seed=0, length=1.0, **ic_options):
    """Equivalence error at ``t_end`` for each grid, with observed orders."""
    n_s_list = [int(n) for n in n_s_list]
    if len(n_s_list) < 3 or any(b <= a for a, b in zip(n_s_list, n_s_list[1:])):
        raise PreconditionError("need at least three strictly increasing grid sizes")
    start = time.perf_counter()
    ds, errs = [], []
    for n in n_s_list:
        grid = Grid(n, length)
        cfg = IntegratorConfig(dt=cfl * grid.ds, t_end=t_end, fd_order=fd_order)
        u0, r0 = initial_conditions(kind, grid, seed=seed, params=params, **ic_options)
        tu = integrate_unreduced(params, u0, grid, cfg, snapshot_stride=max(cfg.n_steps, 1))
        tr = integrate_reduced(params, r0, grid, cfg, snapshot_stride=max(cfg.n_steps, 1))
        ds.append(grid.ds)
        errs.append(float(equivalence_error(tu, tr, params)[-1]))
    orders = observed_orders(ds, errs)
    return ConvergenceTable(
        n_s=n_s_list,
        ds=ds,
        error=errs,
        order=orders,
        exact=all(e <= EXACT_FLOOR for e in errs),
        runtime=time.perf_counter() - start,
    )


# --------------------------------------------------------------------------
# report


@dataclass
class DiagnosticsReport:
    """Time series and tables emitted by a run."""

    times: List[float] = field(default_factory=list)
    total_mu: List[float] = field(default_factory=list)
    energy: List[float] = field(default_factory=list)
    equivalence_error: List[float] = field(default_factory=list)
    pp_residuals: Dict[str, Dict[str, float]] = field(default_factory=dict)
    bracket_residuals: List[Dict[str, object]] = field(default_factory=list)
    convergence: Optional[Dict[str, object]] = None
    identities: List[Dict[str, object]] = field(default_factory=list)

    def validate(self):
        t = np.asarray(self.times, dtype=float)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise PreconditionError("report time stamps are not increasing")
        for name in ("times", "total_mu", "energy", "equivalence_error"):
            if not np.all(np.isfinite(np.asarray(getattr(self, name), dtype=float))):
                raise PreconditionError(f"report series {name} has non-finite entries")
        return self

    def to_dict(self):
        return asdict(self)


def reduced_report(params, traj, with_residuals=True):
    """Report for a reduced run: conserved sums, energy and PP residual norms."""
    order = traj.config.fd_order
    rep = DiagnosticsReport(
        times=[float(t) for t in traj.times],
        total_mu=[float(total_mu(traj.at(k), traj.grid)) for k in range(len(traj))],
        energy=[energy_reduced(params, traj.at(k), traj.grid, order) for k in range(len(traj))],
    )
    if with_residuals and len(traj) >= 3:
        res = intrinsic_pp_residuals(params, snapshots_from_reduced(params, traj), order)
        rep.pp_residuals = {k: norms(v, traj.grid) for k, v in res.items()}
    return rep


def unreduced_report(params, traj, n_forms=5, seed=0, with_residuals=True):
    """Report for an unreduced run: projected sums, energy, PP and bracket residuals."""
    order = traj.config.fd_order
    proj = reduce_field(params, traj.field, traj.grid, order)
    rep = DiagnosticsReport(
        times=[float(t) for t in traj.times],
        total_mu=[float(v) for v in total_mu(proj, traj.grid)],
        energy=[energy_unreduced(params, traj.at(k), traj.grid, order) for k in range(len(traj))],
    )
    if with_residuals and len(traj) >= 3:
        res = intrinsic_pp_residuals(params, snapshots_from_unreduced(params, traj), order)
        rep.pp_residuals = {k: norms(v, traj.grid) for k, v in res.items()}
        for k, form in enumerate(seeded_generator_forms(n_forms, seed)):
            entry = {"form": k, "nu": [float(v) for v in form.nu]}
            entry.update(norms(bracket_identity_residual(params, traj, form), traj.grid))
            rep.bracket_residuals.append(entry)
    return rep
