"""Geometry of the quotient of SO(3) by rotations about the spatial e3 axis.

The projection is ``R -> zeta = R^T e3``.  Spatial tangent vectors split into
a fiber part along ``e3`` (the mechanical connection) and a horizontal part
orthogonal to it.
"""

import numpy as np

from .errors import PreconditionError
from .so3 import E3, exp_so3, project_to_so3, require_tangent, require_unit
from .strand import ReducedPoint, UnreducedPoint

REORTHO_TOL = 1e-7


def project_sphere(R):
    """Return ``zeta = R^T e3``."""
    return np.asarray(R, dtype=float)[..., 2, :].copy()


def mech_connection(v):
    """Fiber component ``<v, e3>`` of a spatial tangent vector."""
    return np.asarray(v, dtype=float)[..., 2]


def tangent_projection(R, v):
    """Push a spatial tangent vector at ``R`` down to the sphere: ``R^T (e3 x v)``."""
    v = np.asarray(v, dtype=float)
    w = np.cross(np.broadcast_to(E3, v.shape), v)
    return np.einsum("...ji,...j->...i", R, w)


def horizontal_lift(R, v_zeta):
    """Horizontal lift ``-e3 x R v_zeta`` of a sphere tangent vector at ``zeta = R^T e3``."""
    R = np.asarray(R, dtype=float)
    zeta = project_sphere(R)
    require_tangent(zeta, v_zeta, 1e-9, "v_zeta")
    Rv = np.einsum("...ij,...j->...i", R, v_zeta)
    return -np.cross(np.broadcast_to(E3, Rv.shape), Rv)


def kappa_strand(u):
    """Reduce ``(R, p_t, p_s)`` to ``(zeta, sigma, mu)``; sigma is tangent by construction."""
    zeta = project_sphere(u.R)
    P_t = np.einsum("...ji,...j->...i", u.R, u.p_t)
    P_s = np.einsum("...ji,...j->...i", u.R, u.p_s)
    return ReducedPoint(
        zeta=zeta,
        sigma_t=np.cross(zeta, P_t),
        sigma_s=np.cross(zeta, P_s),
        mu_t=np.sum(zeta * P_t, axis=-1),
        mu_s=np.sum(zeta * P_s, axis=-1),
    )


def _clean_sigma(zeta, sigma):
    sigma = np.asarray(sigma, dtype=float)
    normal = np.sum(zeta * sigma, axis=-1)
    scale = np.maximum(1.0, np.linalg.norm(sigma, axis=-1))
    if np.max(np.abs(normal) / scale, initial=0.0) > REORTHO_TOL:
        raise PreconditionError("sigma has a normal component above 1e-7")
    return sigma - normal[..., None] * zeta


def reconstruct_momentum(zeta, sigma, mu):
    """Body momentum ``R^T p = mu zeta - zeta x sigma``.

    Small normal drift in ``sigma`` (below 1e-7) is projected out first.
    """
    zeta = require_unit(zeta, 1e-9)
    sigma = _clean_sigma(zeta, sigma)
    return np.asarray(mu, dtype=float)[..., None] * zeta - np.cross(zeta, sigma)


def lift_point(R, r):
    """Unreduced point over ``R`` whose reduction is ``r`` (requires ``R^T e3 = zeta``)."""
    R = np.asarray(R, dtype=float)
    if np.max(np.abs(project_sphere(R) - r.zeta), initial=0.0) > 1e-9:
        raise PreconditionError("R does not lie over zeta")
    P_t = reconstruct_momentum(r.zeta, r.sigma_t, r.mu_t)
    P_s = reconstruct_momentum(r.zeta, r.sigma_s, r.mu_s)
    return UnreducedPoint(
        R=R,
        p_t=np.einsum("...ij,...j->...i", R, P_t),
        p_s=np.einsum("...ij,...j->...i", R, P_s),
    )


def curvature_pairing(zeta, a, b):
    """Curvature of the connection on tangent vectors: ``<-zeta x a, b> = -<zeta, a x b>``."""
    require_tangent(zeta, a, 1e-9, "a")
    require_tangent(zeta, b, 1e-9, "b")
    return -np.sum(zeta * np.cross(a, b), axis=-1)


def reconstruct_rotation_field(zeta, zeta_t, eta, R0, dt):
    """Advance rotations one step from reduced velocities.

    Uses ``R <- exp(dt w) R0`` with spatial angular velocity
    ``w = eta e3 - e3 x (R0 zeta_t)``.  Fed with midpoint values this is
    second order; ``zeta`` is only checked against ``R0`` for consistency.
    """
    R0 = np.asarray(R0, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if np.max(np.abs(project_sphere(R0) - zeta), initial=0.0) > 1e-6:
        raise PreconditionError("R0 does not lie over zeta")
    Rzt = np.einsum("...ij,...j->...i", R0, zeta_t)
    e3 = np.broadcast_to(E3, Rzt.shape)
    w = np.asarray(eta, dtype=float)[..., None] * e3 - np.cross(e3, Rzt)
    return project_to_so3(exp_so3(dt * w) @ R0)
