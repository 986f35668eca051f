"""Hamiltonians, Lagrangians and Legendre maps of the charged SO(3)-strand.

Tangent and cotangent vectors at ``R`` are identified with spatial vectors:
``R_t`` stands for ``w = vee(dR/dt R^T)`` and momenta ``p`` pair with ``w`` by
the dot product.  Body quantities are ``R^T w`` and ``R^T p``.  All
functions broadcast over leading axes.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .so3 import E3, SpdTensor, as_rotation, require_tangent, require_unit

_UNIT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StrandParams:
    """Physical constants: inertia ``I``, stiffness ``J``, field ``e`` and dipole ``chi``."""

    I: SpdTensor
    J: SpdTensor
    e: float = 0.0
    chi: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        I = self.I if isinstance(self.I, SpdTensor) else SpdTensor(self.I)
        J = self.J if isinstance(self.J, SpdTensor) else SpdTensor(self.J)
        chi = np.array(self.chi, dtype=float)
        if chi.shape != (3,) or not np.all(np.isfinite(chi)):
            raise InvalidInput("chi must be a finite 3-vector")
        if not np.isfinite(self.e):
            raise InvalidInput("field strength e must be finite")
        chi.setflags(write=False)
        object.__setattr__(self, "I", I)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "e", float(self.e))
        object.__setattr__(self, "chi", chi)

    @classmethod
    def chiral(cls):
        """Isotropic tensors and no dipole."""
        return cls(np.eye(3), np.eye(3), 0.0, np.zeros(3))


@dataclass(frozen=True)
class UnreducedPoint:
    """Rotation ``R`` with spatial momenta ``p_t`` and ``p_s``."""

    R: np.ndarray
    p_t: np.ndarray
    p_s: np.ndarray


@dataclass(frozen=True)
class ReducedPoint:
    """Sphere point ``zeta`` with tangent momenta ``sigma_*`` and fiber momenta ``mu_*``."""

    zeta: np.ndarray
    sigma_t: np.ndarray
    sigma_s: np.ndarray
    mu_t: np.ndarray
    mu_s: np.ndarray

    def validate(self, tol=_UNIT_TOL):
        require_unit(self.zeta, tol)
        require_tangent(self.zeta, self.sigma_t, tol, "sigma_t")
        require_tangent(self.zeta, self.sigma_s, tol, "sigma_s")
        return self


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _body(R, v):
    """``R^T v`` for stacked rotations and vectors."""
    return np.einsum("...ji,...j->...i", R, v)


def _spatial(R, v):
    return np.einsum("...ij,...j->...i", R, v)


def h_unreduced(params, u):
    """Hamiltonian density at an unreduced point."""
    P_t = _body(u.R, u.p_t)
    P_s = _body(u.R, u.p_s)
    kin_t = 0.5 * _dot(P_t @ params.I.inverse.T, P_t)
    kin_s = 0.5 * _dot(P_s @ params.J.inverse.T, P_s)
    pot = params.e * _spatial(u.R, params.chi)[..., 2]
    return kin_t - kin_s + pot


def grad_h_unreduced(params, u):
    """Partial derivatives of the Hamiltonian.

    ``dp_t`` and ``dp_s`` are ordinary gradients in the momenta.  ``dR`` is the
    derivative along the lifted left action ``(R, p) -> (exp(v)R, exp(v)p)``,
    i.e. ``d/de H(exp(e v^) R, exp(e v^) p) = <dR, v>``.  Kinetic terms are
    invariant under that action so only the dipole contributes.
    """
    R = u.R
    dp_t = _spatial(R, _body(R, u.p_t) @ params.I.inverse.T)
    dp_s = -_spatial(R, _body(R, u.p_s) @ params.J.inverse.T)
    Rchi = _spatial(R, params.chi)
    dR = params.e * np.cross(Rchi, np.broadcast_to(E3, Rchi.shape))
    return dp_t, dp_s, dR


def legendre_L(params, R, R_t, R_s):
    """Velocities to momenta: ``p_t = R I R^T R_t`` and ``p_s = -R J R^T R_s``."""
    p_t = _spatial(R, _body(R, R_t) @ params.I.matrix.T)
    p_s = -_spatial(R, _body(R, R_s) @ params.J.matrix.T)
    return p_t, p_s


def legendre_L_inv(params, R, p_t, p_s):
    """Momenta to velocities, inverse of :func:`legendre_L`."""
    R_t = _spatial(R, _body(R, p_t) @ params.I.inverse.T)
    R_s = -_spatial(R, _body(R, p_s) @ params.J.inverse.T)
    return R_t, R_s


def lagrangian_L(params, R, R_t, R_s):
    """Lagrangian density ``1/2|R^T R_t|_I^2 - 1/2|R^T R_s|_J^2 - e e3.R chi``."""
    W_t = _body(R, R_t)
    W_s = _body(R, R_s)
    kin_t = 0.5 * _dot(W_t @ params.I.matrix.T, W_t)
    kin_s = 0.5 * _dot(W_s @ params.J.matrix.T, W_s)
    return kin_t - kin_s - params.e * _spatial(R, params.chi)[..., 2]


def hamiltonian_from_lagrangian(params, R, R_t, R_s):
    """``<p_t, R_t> + <p_s, R_s> - L`` evaluated through :func:`legendre_L`."""
    p_t, p_s = legendre_L(params, R, R_t, R_s)
    return _dot(p_t, R_t) + _dot(p_s, R_s) - lagrangian_L(params, R, R_t, R_s)


def cross_terms(params, zeta):
    """The vectors ``zeta x I^-1 zeta`` and ``zeta x J^-1 zeta``.

    They couple the fiber and tangent momenta and vanish for isotropic tensors.
    """
    return (
        np.cross(zeta, zeta @ params.I.inverse.T),
        np.cross(zeta, zeta @ params.J.inverse.T),
    )


def h_reduced(params, r, check=True):
    """Reduced Hamiltonian density, written out term by term."""
    if check:
        require_unit(r.zeta, _UNIT_TOL)
    zeta = r.zeta
    Iinv, Jinv = params.I.inverse, params.J.inverse
    cross_t, cross_s = cross_terms(params, zeta)
    zs_t = np.cross(zeta, r.sigma_t)
    zs_s = np.cross(zeta, r.sigma_s)
    mu_t = np.asarray(r.mu_t, dtype=float)
    mu_s = np.asarray(r.mu_s, dtype=float)
    t_part = (
        0.5 * mu_t**2 * _dot(zeta, zeta @ Iinv.T)
        + mu_t * _dot(r.sigma_t, cross_t)
        + 0.5 * _dot(zs_t, zs_t @ Iinv.T)
    )
    s_part = (
        0.5 * mu_s**2 * _dot(zeta, zeta @ Jinv.T)
        + mu_s * _dot(r.sigma_s, cross_s)
        + 0.5 * _dot(zs_s, zs_s @ Jinv.T)
    )
    return t_part - s_part + params.e * _dot(zeta, params.chi)


def _body_momentum(zeta, sigma, mu):
    return np.asarray(mu, dtype=float)[..., None] * zeta - np.cross(zeta, sigma)


def fiber_derivs_h(params, r):
    """Return ``(dh/dsigma_t, dh/dsigma_s, dh/dmu_t, dh/dmu_s)``.

    These are ``(zeta_t, zeta_s, eta, xi)``: the sigma-derivatives are tangent
    to the sphere and the mu-derivatives are the fiber angular velocities.
    """
    require_unit(r.zeta, _UNIT_TOL)
    zeta = r.zeta
    Om_t = _body_momentum(zeta, r.sigma_t, r.mu_t) @ params.I.inverse.T
    Om_s = -(_body_momentum(zeta, r.sigma_s, r.mu_s) @ params.J.inverse.T)
    return np.cross(zeta, Om_t), np.cross(zeta, Om_s), _dot(zeta, Om_t), _dot(zeta, Om_s)


def reduced_lagrangian_l(params, zeta, zeta_t, zeta_s, eta, xi, check=True):
    """Reduced Lagrangian density in the variables ``(zeta, zeta_t, zeta_s, eta, xi)``."""
    if check:
        require_unit(zeta, _UNIT_TOL)
        require_tangent(zeta, zeta_t, _UNIT_TOL, "zeta_t")
        require_tangent(zeta, zeta_s, _UNIT_TOL, "zeta_s")
    I, J = params.I.matrix, params.J.matrix
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    w_t = np.cross(zeta_t, zeta)
    w_s = np.cross(zeta_s, zeta)
    t_part = 0.5 * eta**2 * _dot(zeta, zeta @ I.T) + eta * _dot(zeta, w_t @ I.T) + 0.5 * _dot(w_t, w_t @ I.T)
    s_part = 0.5 * xi**2 * _dot(zeta, zeta @ J.T) + xi * _dot(zeta, w_s @ J.T) + 0.5 * _dot(w_s, w_s @ J.T)
    return t_part - s_part - params.e * _dot(zeta, params.chi)


def reduced_legendre(params, zeta, zeta_t, zeta_s, eta, xi):
    """Reduced velocities to a :class:`ReducedPoint`."""
    I, J = params.I.matrix, params.J.matrix
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    m_t = eta[..., None] * (zeta @ I.T) + np.cross(zeta_t, zeta) @ I.T
    m_s = -(xi[..., None] * (zeta @ J.T) + np.cross(zeta_s, zeta) @ J.T)
    return ReducedPoint(
        zeta=zeta,
        sigma_t=np.cross(zeta, m_t),
        sigma_s=np.cross(zeta, m_s),
        mu_t=_dot(zeta, m_t),
        mu_s=_dot(zeta, m_s),
    )


def reduced_legendre_inv(params, r):
    """Reduced momenta back to ``(zeta_t, zeta_s, eta, xi)``."""
    zeta_t, zeta_s, eta, xi = fiber_derivs_h(params, r)
    return zeta_t, zeta_s, eta, xi


def reduced_h_from_legendre(params, r):
    """Reduced Hamiltonian as ``<sigma, zeta_dot> + mu eta_like - l``."""
    r.validate()
    zeta_t, zeta_s, eta, xi = reduced_legendre_inv(params, r)
    pairing = (
        _dot(r.sigma_t, zeta_t) + np.asarray(r.mu_t) * eta + _dot(r.sigma_s, zeta_s) + np.asarray(r.mu_s) * xi
    )
    l_val = reduced_lagrangian_l(params, r.zeta, zeta_t, zeta_s, eta, xi, check=False)
    return pairing - l_val


def energy_density_reduced(params, zeta, sigma_t, mu_t, sigma_s, mu_s):
    """Conserved energy density in reduced variables.

    Time translation is a symmetry, and its Noether density is
    ``h - <p_s, dh/dp_s>``, i.e. the Hamiltonian with the sign of the spatial
    kinetic term flipped.  It equals ``1/2|Om_t|_I^2 + 1/2|Om_s|_J^2 + e zeta.chi``.
    """
    P_t = _body_momentum(zeta, sigma_t, mu_t)
    P_s = _body_momentum(zeta, sigma_s, mu_s)
    return (
        0.5 * _dot(P_t, P_t @ params.I.inverse.T)
        + 0.5 * _dot(P_s, P_s @ params.J.inverse.T)
        + params.e * _dot(zeta, params.chi)
    )


def energy_density_unreduced(params, R, p_t, p_s):
    """Conserved energy density ``H - <p_s, dH/dp_s>`` at unreduced points."""
    R = as_rotation(R)
    P_t = _body(R, p_t)
    P_s = _body(R, p_s)
    return (
        0.5 * _dot(P_t, P_t @ params.I.inverse.T)
        + 0.5 * _dot(P_s, P_s @ params.J.inverse.T)
        + params.e * _spatial(R, params.chi)[..., 2]
    )

