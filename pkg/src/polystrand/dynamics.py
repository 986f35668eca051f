"""Method-of-lines integration of the strand on a periodic grid.

Two semi-discrete systems are advanced:

* the unreduced Hamilton equations for ``(R, p_t)``, with ``p_s`` rebuilt
  from the discrete ``R_s`` at every evaluation;
* the reduced equations for ``(zeta, sigma_t, mu_t, xi)``, with
  ``(sigma_s, mu_s)`` rebuilt from ``(zeta, zeta_s, xi)``.

Rotations advance with a Runge-Kutta-Munthe-Kaas scheme of order four
(``R = exp(Theta) R0``); everything else uses classical RK4.
"""

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import BlowUp, InvalidInput, ValidationError
from .kernels import active_kernels
from .reduction import kappa_strand
from .so3 import E1, E3, exp_so3, hat, left_jacobian, left_jacobian_inv, project_to_so3
from .strand import UnreducedPoint, legendre_L

CFL_LIMIT = 0.5


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid of ``n_s`` nodes on ``[0, length)``."""

    n_s: int
    length: float = 1.0

    def __post_init__(self):
        if int(self.n_s) != self.n_s or self.n_s < 8:
            raise InvalidInput("grid needs an integer n_s >= 8")
        if not (np.isfinite(self.length) and self.length > 0):
            raise InvalidInput("grid length must be positive")
        object.__setattr__(self, "n_s", int(self.n_s))
        object.__setattr__(self, "length", float(self.length))

    @property
    def ds(self):
        return self.length / self.n_s

    @property
    def s(self):
        return np.arange(self.n_s) * self.ds


@dataclass(frozen=True)
class IntegratorConfig:
    """Time-stepping controls; ``dt <= 0.5 ds`` is checked by :meth:`check`."""

    dt: float
    t_end: float
    scheme: str = "rk4"
    fd_order: int = 2
    renormalize_every: int = 1
    rotation_update: str = "multiplicative"

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValidationError("dt must be positive")
        if not (np.isfinite(self.t_end) and self.t_end >= 0):
            raise ValidationError("t_end must be non-negative")
        if self.scheme != "rk4":
            raise ValidationError("only the rk4 scheme is available")
        if self.fd_order not in (2, 4):
            raise ValidationError("fd_order must be 2 or 4")
        if int(self.renormalize_every) != self.renormalize_every or self.renormalize_every < 1:
            raise ValidationError("renormalize_every must be a positive integer")
        if self.rotation_update not in ("multiplicative", "additive"):
            raise ValidationError("rotation_update must be 'multiplicative' or 'additive'")

    @classmethod
    def from_cfl(cls, grid, cfl, t_end, **kw):
        return cls(dt=cfl * grid.ds, t_end=t_end, **kw)

    def check(self, grid):
        if self.dt > CFL_LIMIT * grid.ds * (1.0 + 1e-12):
            raise ValidationError(f"dt = {self.dt:.3e} exceeds the CFL bound 0.5*ds = {0.5 * grid.ds:.3e}")
        return self

    @property
    def n_steps(self):
        return int(np.ceil(self.t_end / self.dt - 1e-9))

    @property
    def step_size(self):
        """Step actually used: ``t_end`` split into :attr:`n_steps` equal steps."""
        n = self.n_steps
        return self.t_end / n if n else self.dt


@dataclass(frozen=True)
class UnreducedField:
    """Rotations ``R`` of shape ``(..., N, 3, 3)`` and momenta ``p_t`` of shape ``(..., N, 3)``."""

    R: np.ndarray
    p_t: np.ndarray

    def is_finite(self):
        return bool(np.all(np.isfinite(self.R)) and np.all(np.isfinite(self.p_t)))


@dataclass(frozen=True)
class ReducedField:
    """``zeta``, ``sigma_t`` of shape ``(..., N, 3)``; ``mu_t``, ``xi`` of shape ``(..., N)``."""

    zeta: np.ndarray
    sigma_t: np.ndarray
    mu_t: np.ndarray
    xi: np.ndarray

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in (self.zeta, self.sigma_t, self.mu_t, self.xi))

    def pack(self):
        return np.concatenate([self.zeta, self.sigma_t, self.mu_t[..., None], self.xi[..., None]], axis=-1)

    @classmethod
    def unpack(cls, y):
        return cls(y[..., 0:3], y[..., 3:6], y[..., 6], y[..., 7])


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of a run: ``times`` of shape ``(T,)`` and a field with a leading time axis."""

    times: np.ndarray
    field: object
    grid: Grid
    config: IntegratorConfig

    def __len__(self):
        return self.times.size

    def at(self, k):
        f = self.field
        return type(f)(*(getattr(f, name)[k] for name in f.__dataclass_fields__))


# --------------------------------------------------------------------------
# spatial derivative and right-hand sides


def spatial_deriv(f, grid, order=2):
    """Periodic central difference along the leading (node) axis."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != grid.n_s:
        raise InvalidInput("field length does not match the grid")
    flat = np.ascontiguousarray(f.reshape(f.shape[0], -1))
    return active_kernels().diff(flat, grid.ds, order).reshape(f.shape)


def _params_arrays(params):
    return (
        np.ascontiguousarray(params.I.inverse),
        np.ascontiguousarray(params.J.matrix),
        np.ascontiguousarray(params.J.inverse),
        float(params.e),
        np.ascontiguousarray(params.chi),
    )


def rhs_unreduced(params, field, grid, fd_order=2):
    """Return ``(omega_t, dp_t/dt)``: spatial angular velocity and momentum rate."""
    Iinv, J, _, e, chi = _params_arrays(params)
    R = np.ascontiguousarray(field.R, dtype=float)
    p = np.ascontiguousarray(field.p_t, dtype=float)
    return active_kernels().unreduced_rates(R, p, Iinv, J, e, chi, grid.ds, fd_order)


def derived_p_s(params, field, grid, fd_order=2):
    """``p_s = -R J R^T w_s`` with ``w_s = vee(R_s R^T)`` from the discrete derivative."""
    R = np.asarray(field.R)
    dR = spatial_deriv(R, grid, fd_order)
    M = dR @ np.swapaxes(R, -1, -2)
    w_s = 0.5 * np.stack([M[:, 2, 1] - M[:, 1, 2], M[:, 0, 2] - M[:, 2, 0], M[:, 1, 0] - M[:, 0, 1]], -1)
    _, p_s = legendre_L(params, R, np.zeros_like(w_s), w_s)
    return p_s


def rhs_reduced(params, field, grid, fd_order=2, probe: Optional[Callable] = None):
    """Time derivative of a :class:`ReducedField`.

    ``probe(cross_t, cross_s)`` receives the coupling vectors ``zeta x I^-1 zeta``
    and ``zeta x J^-1 zeta`` at every evaluation.
    """
    Iinv, J, Jinv, e, chi = _params_arrays(params)
    args = [np.ascontiguousarray(a, dtype=float) for a in (field.zeta, field.sigma_t, field.mu_t, field.xi)]
    z_t, d_sig, d_mu, d_xi, cross_t, cross_s = active_kernels().reduced_rates(
        *args, Iinv, J, Jinv, e, chi, grid.ds, fd_order
    )
    if probe is not None:
        probe(cross_t, cross_s)
    return ReducedField(z_t, d_sig, d_mu, d_xi)


def derived_reduced_s(params, field, grid, fd_order=2):
    """``(zeta_s, sigma_s, mu_s)`` rebuilt from ``(zeta, xi)`` as inside :func:`rhs_reduced`."""
    zeta = np.asarray(field.zeta)
    z_s = spatial_deriv(zeta, grid, fd_order)
    Om_s = field.xi[..., None] * zeta - np.cross(zeta, z_s)
    P_s = -(Om_s @ params.J.matrix.T)
    return z_s, np.cross(zeta, P_s), np.sum(zeta * P_s, axis=-1)


# --------------------------------------------------------------------------
# steppers


def _check(field, step):
    if not field.is_finite():
        raise BlowUp(f"non-finite state after step {step}", step=step)


def step_unreduced(params, field, grid, config, dt=None, step_index=0):
    """One RK4 step; rotations via Munthe-Kaas stages or additive stages plus polar projection."""
    dt = config.step_size if dt is None else dt
    order = config.fd_order
    R0, p0 = np.asarray(field.R, dtype=float), np.asarray(field.p_t, dtype=float)

    def rates(R, p):
        return rhs_unreduced(params, UnreducedField(R, p), grid, order)

    if config.rotation_update == "multiplicative":
        w1, k1 = rates(R0, p0)
        K1 = w1
        T2 = 0.5 * dt * K1
        w2, k2 = rates(exp_so3(T2) @ R0, p0 + 0.5 * dt * k1)
        K2 = np.einsum("nij,nj->ni", left_jacobian_inv(T2), w2)
        T3 = 0.5 * dt * K2
        w3, k3 = rates(exp_so3(T3) @ R0, p0 + 0.5 * dt * k2)
        K3 = np.einsum("nij,nj->ni", left_jacobian_inv(T3), w3)
        T4 = dt * K3
        w4, k4 = rates(exp_so3(T4) @ R0, p0 + dt * k3)
        K4 = np.einsum("nij,nj->ni", left_jacobian_inv(T4), w4)
        R = exp_so3(dt / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4)) @ R0
    else:
        w1, k1 = rates(R0, p0)
        R2 = R0 + 0.5 * dt * hat(w1) @ R0
        w2, k2 = rates(R2, p0 + 0.5 * dt * k1)
        R3 = R0 + 0.5 * dt * hat(w2) @ R2
        w3, k3 = rates(R3, p0 + 0.5 * dt * k2)
        R4 = R0 + dt * hat(w3) @ R3
        w4, k4 = rates(R4, p0 + dt * k3)
        R = R0 + dt / 6.0 * (hat(w1) @ R0 + 2 * hat(w2) @ R2 + 2 * hat(w3) @ R3 + hat(w4) @ R4)
    p = p0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    out = UnreducedField(R, p)
    _check(out, step_index)
    if config.rotation_update == "additive" or (step_index + 1) % config.renormalize_every == 0:
        out = UnreducedField(project_to_so3(out.R), out.p_t)
    return out


def _renormalize(field):
    zeta = field.zeta / np.linalg.norm(field.zeta, axis=-1, keepdims=True)
    sigma = field.sigma_t - np.sum(field.sigma_t * zeta, axis=-1, keepdims=True) * zeta
    return ReducedField(zeta, sigma, field.mu_t, field.xi)


def step_reduced(params, field, grid, config, dt=None, step_index=0, probe=None):
    """One RK4 step of the reduced system followed by re-projection of ``(zeta, sigma_t)``."""
    dt = config.step_size if dt is None else dt
    order = config.fd_order

    def f(y):
        return rhs_reduced(params, ReducedField.unpack(y), grid, order, probe).pack()

    y0 = field.pack()
    k1 = f(y0)
    k2 = f(y0 + 0.5 * dt * k1)
    k3 = f(y0 + 0.5 * dt * k2)
    k4 = f(y0 + dt * k3)
    out = ReducedField.unpack(y0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
    _check(out, step_index)
    if (step_index + 1) % config.renormalize_every == 0:
        out = _renormalize(out)
    return out


def _stack(fields):
    cls = type(fields[0])
    return cls(*(np.stack([getattr(f, n) for f in fields]) for n in cls.__dataclass_fields__))


def _integrate(stepper, field, grid, config, snapshot_stride, **kw):
    config.check(grid)
    if int(snapshot_stride) < 1:
        raise ValidationError("snapshot_stride must be a positive integer")
    n = config.n_steps
    dt = config.step_size
    snaps, times = [field], [0.0]
    for k in range(n):
        field = stepper(field, dt=dt, step_index=k, **kw)
        if (k + 1) % snapshot_stride == 0 or k + 1 == n:
            snaps.append(field)
            times.append((k + 1) * dt)
    return Trajectory(np.array(times), _stack(snaps), grid, config)


def integrate_unreduced(params, field, grid, config, snapshot_stride=1):
    """Run the unreduced system to ``t_end``; snapshots every ``snapshot_stride`` steps and at the end."""

    def stepper(f, **kw):
        return step_unreduced(params, f, grid, config, **kw)

    return _integrate(stepper, field, grid, config, snapshot_stride)


def integrate_reduced(params, field, grid, config, snapshot_stride=1, probe=None):
    """Run the reduced system to ``t_end``."""

    def stepper(f, **kw):
        return step_reduced(params, f, grid, config, probe=probe, **kw)

    return _integrate(stepper, field, grid, config, snapshot_stride)


# --------------------------------------------------------------------------
# conserved quantities


def total_mu(field, grid):
    """``sum mu_t ds`` over the grid (fixed summation order)."""
    return np.sum(np.asarray(field.mu_t), axis=-1) * grid.ds


def reduce_field(params, field, grid, fd_order=2):
    """Project an unreduced field: ``kappa_strand`` plus ``xi`` from the discrete ``R_s``."""
    R = np.asarray(field.R)
    lead = R.shape[:-3]
    if lead:
        parts = [reduce_field(params, UnreducedField(R[k], field.p_t[k]), grid, fd_order) for k in np.ndindex(lead)]
        out = _stack(parts)
        return ReducedField(*(a.reshape(lead + a.shape[1:]) for a in (out.zeta, out.sigma_t, out.mu_t, out.xi)))
    dR = spatial_deriv(R, grid, fd_order)
    M = dR @ np.swapaxes(R, -1, -2)
    xi = 0.5 * (M[:, 1, 0] - M[:, 0, 1])
    r = kappa_strand(UnreducedPoint(R, field.p_t, np.zeros_like(field.p_t)))
    return ReducedField(r.zeta, r.sigma_t, r.mu_t, xi)


def energy_reduced(params, field, grid, fd_order=2):
    """Discrete energy ``sum (1/2|P_t|^2_{I^-1} + 1/2|P_s|^2_{J^-1} + e zeta.chi) ds``."""
    zeta = np.asarray(field.zeta)
    P_t = field.mu_t[..., None] * zeta - np.cross(zeta, field.sigma_t)
    _, sig_s, mu_s = derived_reduced_s(params, field, grid, fd_order)
    P_s = mu_s[..., None] * zeta - np.cross(zeta, sig_s)
    dens = (
        0.5 * np.sum(P_t * (P_t @ params.I.inverse.T), -1)
        + 0.5 * np.sum(P_s * (P_s @ params.J.inverse.T), -1)
        + params.e * (zeta @ params.chi)
    )
    return float(np.sum(dens) * grid.ds)


def energy_unreduced(params, field, grid, fd_order=2):
    """Discrete energy of an unreduced field, same density as :func:`energy_reduced`."""
    R = np.asarray(field.R)
    p_s = derived_p_s(params, field, grid, fd_order)
    P_t = np.einsum("nji,nj->ni", R, field.p_t)
    P_s = np.einsum("nji,nj->ni", R, p_s)
    dens = (
        0.5 * np.sum(P_t * (P_t @ params.I.inverse.T), -1)
        + 0.5 * np.sum(P_s * (P_s @ params.J.inverse.T), -1)
        + params.e * (R @ params.chi)[:, 2]
    )
    return float(np.sum(dens) * grid.ds)


# --------------------------------------------------------------------------
# initial data


def _align_to(chi):
    """A rotation ``Rbar`` with ``Rbar^T e3 = chi/|chi|``."""
    c = np.asarray(chi, dtype=float)
    nrm = np.linalg.norm(c)
    if nrm == 0.0:
        return np.eye(3)
    c = c / nrm
    axis = np.cross(c, E3)
    sin_t, cos_t = np.linalg.norm(axis), float(c @ E3)
    if sin_t < 1e-14:
        return np.eye(3) if cos_t > 0 else exp_so3(np.pi * E1)
    # Rbar maps c to e3
    return exp_so3(axis / sin_t * np.arctan2(sin_t, cos_t))


def _fourier_profile(rng, s, length, n_modes, amplitude, dim=3):
    k = np.arange(1, n_modes + 1)
    a = rng.normal(size=(n_modes, dim)) / k[:, None] ** 2
    b = rng.normal(size=(n_modes, dim)) / k[:, None] ** 2
    arg = 2 * np.pi * np.outer(s, k) / length
    f = amplitude * (np.sin(arg) @ a + np.cos(arg) @ b)
    df = amplitude * (2 * np.pi * k / length * np.cos(arg)) @ a - amplitude * (2 * np.pi * k / length * np.sin(arg)) @ b
    return f, df


def initial_conditions(kind, grid, seed=0, params=None, **options):
    """Deterministic initial data and its exact reduction.

    ``kind`` is ``"equilibrium"`` (options ``phi``, ``chi``), ``"twist"``
    (``amplitude``, ``mode``) or ``"fourier"`` (``amplitude``,
    ``momentum_amplitude``, ``modes``).  The reduced field is ``kappa_strand``
    of the unreduced one with ``xi = <vee(R_s R^T), e3>`` from the exact
    derivative of the profile.
    """
    s = grid.s
    N = grid.n_s
    if kind == "equilibrium":
        chi = options.get("chi", params.chi if params is not None else E3)
        phi = float(options.get("phi", 0.0))
        R = np.broadcast_to(exp_so3(phi * E3) @ _align_to(chi), (N, 3, 3)).copy()
        p_t = np.zeros((N, 3))
        w_s = np.zeros((N, 3))
    elif kind == "twist":
        amp = float(options.get("amplitude", 0.3))
        mode = int(options.get("mode", 1))
        arg = 2 * np.pi * mode * s / grid.length
        theta = amp * np.sin(arg)
        R = exp_so3(theta[:, None] * E1)
        p_t = np.zeros((N, 3))
        w_s = (amp * 2 * np.pi * mode / grid.length * np.cos(arg))[:, None] * E1
    elif kind == "fourier":
        rng = np.random.default_rng(seed)
        v, dv = _fourier_profile(rng, s, grid.length, int(options.get("modes", 2)), float(options.get("amplitude", 0.3)))
        p_t, _ = _fourier_profile(rng, s, grid.length, int(options.get("modes", 2)), float(options.get("momentum_amplitude", 0.2)))
        R = exp_so3(v)
        w_s = np.einsum("nij,nj->ni", left_jacobian(v), dv)
    else:
        raise InvalidInput(f"unknown initial condition kind {kind!r}")
    unreduced = UnreducedField(R, p_t)
    r = kappa_strand(UnreducedPoint(R, p_t, np.zeros_like(p_t)))
    reduced = ReducedField(r.zeta, r.sigma_t, r.mu_t, w_s[:, 2].copy())
    return unreduced, reduced


def with_config(config, **changes):
    return replace(config, **changes)
