"""Concrete charts for the local evaluator.

* :func:`abelian_toy` is a one-dimensional bundle with a line group and
  x-dependent connection data.
* :func:`so3_toy` has a three-dimensional non-abelian fiber group.
* :func:`strand_chart` covers the rotation group of the strand by Euler
  angles ``R = exp(phi e3) Rx(alpha) Ry(beta)``.  The base is ``(t, s)``, the
  sphere coordinates are ``(alpha, beta)`` and the group coordinate is ``phi``.
"""

import numpy as np

from .chart_engine import ChartSpec, PointR, PointU
from .errors import ChartDomain
from .so3 import LEVI_CIVITA, exp_so3, log_so3, right_jacobian
from .strand import ReducedPoint, UnreducedPoint, h_reduced, h_unreduced


def _lead(x, s):
    return np.broadcast_shapes(np.shape(x)[:-1], np.shape(s)[:-1])


# --------------------------------------------------------------------------
# abelian toy


def abelian_toy():
    """Line bundle over a line with nonzero, x-dependent ``A`` and ``Lam``."""

    def A_x(x, s):
        return (0.3 * np.sin(x[..., 0]) + 0.2 * s[..., 0] * x[..., 0])[..., None, None]

    def A_s(x, s):
        return (0.5 + 0.4 * np.cos(x[..., 0] * s[..., 0]))[..., None, None]

    def Lam_s(x, s):
        return (0.7 * x[..., 0] + 0.1 * np.sin(s[..., 0]))[..., None, None]

    return ChartSpec(n=1, dF=1, dG=1, c=np.zeros((1, 1, 1)), A_x=A_x, A_s=A_s, Lam_s=Lam_s, name="abelian-toy")


def abelian_toy_h(r):
    """Smooth reduced Hamiltonian for the abelian toy."""
    x, s = r.x[..., 0], r.s[..., 0]
    sig, mu = r.sigma[..., 0, 0], r.mu[..., 0, 0]
    return 0.5 * sig**2 + np.sin(x) * sig * mu + (1.0 + 0.5 * np.cos(s)) * mu**2 + 0.3 * x * s * sig + np.sin(s)


# --------------------------------------------------------------------------
# SO(3) toy


def so3_translate(y, w):
    """Normal coordinates of ``exp(y)^-1 exp(w)``."""
    Ry = exp_so3(y)
    Rw = exp_so3(w)
    return log_so3(np.swapaxes(Ry, -1, -2) @ Rw)


def so3_toy():
    """Bundle over a line with fiber ``R x SO(3)`` and a non-flat connection."""
    k = np.array([1.0, -0.5, 0.25])
    m = np.array([0.3, 0.8, -0.6])

    def A_x(x, s):
        a = np.sin(x[..., 0] + s[..., 0])[..., None] * k
        return a[..., :, None]

    def A_s(x, s):
        a = (1.0 + 0.5 * x[..., 0] * s[..., 0])[..., None] * m + 0.2 * np.cos(s[..., 0])[..., None] * k
        return a[..., :, None]

    def Lam_s(x, s):
        return (0.4 * np.cos(x[..., 0]) - 0.3 * s[..., 0])[..., None, None]

    return ChartSpec(
        n=1,
        dF=1,
        dG=3,
        c=LEVI_CIVITA.copy(),
        A_x=A_x,
        A_s=A_s,
        Lam_s=Lam_s,
        translate=so3_translate,
        z_exact=right_jacobian,
        name="so3-toy",
    )


def so3_toy_h(r):
    """Smooth reduced Hamiltonian for the SO(3) toy, quadratic in momenta."""
    x, s = r.x[..., 0], r.s[..., 0]
    sig = r.sigma[..., 0, 0]
    mu = r.mu[..., 0, :]
    w = np.array([1.0, 2.0, 0.5])
    return (
        0.5 * sig**2
        + 0.5 * np.sum(w * mu**2, axis=-1)
        + np.cos(x) * sig * mu[..., 1]
        + 0.2 * s * mu[..., 0] * mu[..., 2]
        + np.sin(x * s)
    )


# --------------------------------------------------------------------------
# strand Euler chart


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([o, z, z], -1), np.stack([z, c, -s], -1), np.stack([z, s, c], -1)], -2)


def _rot_y(b):
    c, s = np.cos(b), np.sin(b)
    o, z = np.ones_like(b), np.zeros_like(b)
    return np.stack([np.stack([c, z, s], -1), np.stack([z, o, z], -1), np.stack([-s, z, c], -1)], -2)


def _rot_z(p):
    c, s = np.cos(p), np.sin(p)
    o, z = np.ones_like(p), np.zeros_like(p)
    return np.stack([np.stack([c, -s, z], -1), np.stack([s, c, z], -1), np.stack([z, z, o], -1)], -2)


def euler_rotation(alpha, beta, phi):
    """``R = exp(phi e3) Rx(alpha) Ry(beta)``."""
    alpha, beta, phi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (alpha, beta, phi)))
    return _rot_z(phi) @ _rot_x(alpha) @ _rot_y(beta)


def euler_zeta(alpha, beta):
    """``zeta = R^T e3`` for the Euler chart; independent of ``phi``."""
    ca = np.cos(alpha)
    return np.stack([-ca * np.sin(beta), np.sin(alpha), ca * np.cos(beta)], axis=-1)


def euler_zeta_frame(alpha, beta):
    """Coordinate tangent vectors ``[d zeta/d alpha, d zeta/d beta]`` as a ``(..., 3, 2)`` array."""
    ca, sa, cb, sb = np.cos(alpha), np.sin(alpha), np.cos(beta), np.sin(beta)
    d_a = np.stack([sa * sb, ca, -sa * cb], axis=-1)
    d_b = np.stack([-ca * cb, np.zeros_like(ca), -ca * sb], axis=-1)
    return np.stack([d_a, d_b], axis=-1)


def euler_velocity_frame(alpha, phi):
    """Spatial angular velocities of ``d/dalpha``, ``d/dbeta``, ``d/dphi`` as columns."""
    alpha, phi = np.broadcast_arrays(np.asarray(alpha, dtype=float), np.asarray(phi, dtype=float))
    Q = _rot_z(phi)
    ca, sa = np.cos(alpha), np.sin(alpha)
    w_a = Q[..., :, 0]
    w_b = ca[..., None] * Q[..., :, 1] + sa[..., None] * np.array([0.0, 0.0, 1.0])
    w_p = np.broadcast_to(np.array([0.0, 0.0, 1.0]), w_a.shape)
    return np.stack([w_a, w_b, w_p], axis=-1)


def euler_angles(R, tol=1e-6):
    """Inverse of :func:`euler_rotation`; raises :class:`ChartDomain` near ``cos(alpha) = 0``."""
    R = np.asarray(R, dtype=float)
    zeta = R[..., 2, :]
    alpha = np.arcsin(np.clip(zeta[..., 1], -1.0, 1.0))
    if np.any(np.cos(alpha) < tol):
        raise ChartDomain("Euler chart is singular at cos(alpha) = 0")
    beta = np.arctan2(-zeta[..., 0], zeta[..., 2])
    Q = R @ np.swapaxes(_rot_y(beta), -1, -2) @ np.swapaxes(_rot_x(alpha), -1, -2)
    phi = np.arctan2(Q[..., 1, 0], Q[..., 0, 0])
    return alpha, beta, phi


def strand_chart():
    """Chart spec of the strand: ``A_alpha = 0``, ``A_beta = -sin(alpha)`` and zero ``Lam``."""

    def A_x(x, s):
        return np.zeros(_lead(x, s) + (1, 2))

    def A_s(x, s):
        lead = _lead(x, s)
        out = np.zeros(lead + (1, 2))
        out[..., 0, 1] = -np.sin(np.broadcast_to(s[..., 0], lead))
        return out

    return ChartSpec(n=2, dF=2, dG=1, c=np.zeros((1, 1, 1)), A_x=A_x, A_s=A_s, name="strand-euler")


def strand_chart_to_unreduced(u):
    """Map a chart point ``(x, (alpha, beta), phi, p)`` to an :class:`UnreducedPoint`."""
    alpha, beta, phi = u.s[..., 0], u.s[..., 1], u.y[..., 0]
    R = euler_rotation(alpha, beta, phi)
    W = euler_velocity_frame(alpha, phi)
    pc = np.concatenate([u.pa, u.pg], axis=-1)  # (..., 2, 3)
    # p_chart = W^T p  =>  p = W^-T p_chart
    p = np.linalg.solve(np.swapaxes(W, -1, -2)[..., None, :, :], pc[..., None])[..., 0]
    return UnreducedPoint(R=R, p_t=p[..., 0, :], p_s=p[..., 1, :])


def strand_unreduced_to_chart(x, up):
    """Chart coordinates of an :class:`UnreducedPoint` at base point ``x = (t, s)``."""
    alpha, beta, phi = euler_angles(up.R)
    W = euler_velocity_frame(alpha, phi)
    p = np.stack([up.p_t, up.p_s], axis=-2)
    pc = np.einsum("...ka,...ik->...ia", W, p)
    x = np.broadcast_to(np.asarray(x, dtype=float), alpha.shape + (2,))
    return PointU(x=x, s=np.stack([alpha, beta], -1), y=phi[..., None], pa=pc[..., :2], pg=pc[..., 2:])


def strand_chart_to_reduced(r):
    """Map a reduced chart point to a :class:`ReducedPoint` with tangent sigma vectors."""
    alpha, beta = r.s[..., 0], r.s[..., 1]
    zeta = euler_zeta(alpha, beta)
    E = euler_zeta_frame(alpha, beta)
    ca2 = np.cos(alpha) ** 2
    ginv = np.stack([np.ones_like(ca2), 1.0 / ca2], axis=-1)  # the frame is orthogonal
    sig = np.einsum("...ka,...ia->...ik", E, r.sigma * ginv[..., None, :])
    return ReducedPoint(
        zeta=zeta, sigma_t=sig[..., 0, :], sigma_s=sig[..., 1, :], mu_t=r.mu[..., 0, 0], mu_s=r.mu[..., 1, 0]
    )


def strand_reduced_to_chart(x, rp):
    """Chart coordinates ``sigma_a = <sigma, d zeta/d s^a>`` of a :class:`ReducedPoint`."""
    zeta = np.asarray(rp.zeta, dtype=float)
    alpha = np.arcsin(np.clip(zeta[..., 1], -1.0, 1.0))
    beta = np.arctan2(-zeta[..., 0], zeta[..., 2])
    E = euler_zeta_frame(alpha, beta)
    sig = np.stack([rp.sigma_t, rp.sigma_s], axis=-2)
    sc = np.einsum("...ka,...ik->...ia", E, sig)
    mu = np.stack([np.asarray(rp.mu_t, float), np.asarray(rp.mu_s, float)], axis=-1)[..., None]
    x = np.broadcast_to(np.asarray(x, dtype=float), alpha.shape + (2,))
    return PointR(x=x, s=np.stack([alpha, beta], -1), sigma=sc, mu=mu)


def strand_H_chart(params):
    """Unreduced strand Hamiltonian as a function of chart points."""
    return lambda u: h_unreduced(params, strand_chart_to_unreduced(u))


def strand_h_chart(params):
    """Reduced strand Hamiltonian as a function of reduced chart points."""
    return lambda r: h_reduced(params, strand_chart_to_reduced(r), check=False)
