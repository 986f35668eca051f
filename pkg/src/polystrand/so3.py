"""Small-dimension algebra for SO(3), so(3) and the unit sphere.

Every function accepts a single object or a stack of them along leading
axes: vectors have shape ``(..., 3)`` and matrices ``(..., 3, 3)``.
Rotations are stored as plain orthonormal matrices.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, NearCutLocus, OrientationFlip, PreconditionError

ROT_TOL = 1e-9
CUT_LOCUS_MARGIN = 1e-6
_SMALL = 1e-2

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])

# Levi-Civita symbol; structure constants of so(3) in the basis hat(e_k).
LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_i, _j, _k] = 1.0
    LEVI_CIVITA[_j, _i, _k] = -1.0


def hat(v):
    """Return the skew matrix with ``hat(v) @ w == cross(v, w)``."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 3:
        raise InvalidInput(f"expected trailing dimension 3, got shape {v.shape}")
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    zero = np.zeros_like(x)
    return np.stack(
        [
            np.stack([zero, -z, y], axis=-1),
            np.stack([z, zero, -x], axis=-1),
            np.stack([-y, x, zero], axis=-1),
        ],
        axis=-2,
    )


def vee(m, tol=ROT_TOL):
    """Inverse of :func:`hat`; rejects matrices that are not antisymmetric."""
    m = np.asarray(m, dtype=float)
    if m.shape[-2:] != (3, 3):
        raise InvalidInput(f"expected 3x3 matrices, got shape {m.shape}")
    if tol is not None:
        asym = np.max(np.abs(m + np.swapaxes(m, -1, -2)), initial=0.0)
        if not asym <= tol:
            raise InvalidInput(f"matrix is not antisymmetric (|m + m^T| = {asym:.3e})")
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def vee_antisym(m):
    """vee of the antisymmetric part of ``m`` (no tolerance check)."""
    m = np.asarray(m, dtype=float)
    return 0.5 * np.stack(
        [m[..., 2, 1] - m[..., 1, 2], m[..., 0, 2] - m[..., 2, 0], m[..., 1, 0] - m[..., 0, 1]],
        axis=-1,
    )


def _rodrigues_coefficients(theta):
    """Return sin(t)/t, (1-cos t)/t^2 and (t-sin t)/t^3 without cancellation."""
    theta = np.asarray(theta, dtype=float)
    t2 = theta * theta
    small = theta < _SMALL
    safe = np.where(small, 1.0, theta)
    half = 0.5 * safe
    a = np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(safe) / safe)
    b = np.where(
        small,
        0.5 - t2 / 24.0 + t2 * t2 / 720.0,
        0.5 * (np.sin(half) / half) ** 2,
    )
    c = np.where(
        small,
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2**3 / 362880.0,
        (safe - np.sin(safe)) / safe**3,
    )
    return a, b, c


def exp_so3(v):
    """Rodrigues exponential of ``hat(v)``."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    a, b, _ = _rodrigues_coefficients(theta)
    K = hat(v)
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + a[..., None, None] * K + b[..., None, None] * (K @ K)


def log_so3(R):
    """Principal logarithm; raises :class:`NearCutLocus` near angle pi."""
    R = np.asarray(R, dtype=float)
    w = vee_antisym(R)
    sin_t = np.linalg.norm(w, axis=-1)
    cos_t = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(sin_t, cos_t)
    if np.any(theta > np.pi - CUT_LOCUS_MARGIN):
        raise NearCutLocus("rotation angle within 1e-6 of pi")
    small = theta < _SMALL
    safe = np.where(small, 1.0, theta)
    t2 = theta * theta
    # theta / sin(theta), series below the threshold
    factor = np.where(small, 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0, safe / np.sin(safe))
    return factor[..., None] * w


def left_jacobian(v):
    """Left Jacobian of exp: ``d/de exp(v + e w) exp(v)^T = hat(J_l(v) w)``."""
    v = np.asarray(v, dtype=float)
    _, b, c = _rodrigues_coefficients(np.linalg.norm(v, axis=-1))
    K = hat(v)
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + b[..., None, None] * K + c[..., None, None] * (K @ K)


def right_jacobian(v):
    """Right Jacobian of exp: ``exp(v)^T d/de exp(v + e w) = hat(J_r(v) w)``."""
    return left_jacobian(-np.asarray(v, dtype=float))


def left_jacobian_inv(v):
    """Inverse of :func:`left_jacobian` in closed form."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    t2 = theta * theta
    small = theta < _SMALL
    safe = np.where(small, 1.0, theta)
    d = np.where(
        small,
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0,
        1.0 / safe**2 - (1.0 + np.cos(safe)) / (2.0 * safe * np.sin(safe)),
    )
    K = hat(v)
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye - 0.5 * K + d[..., None, None] * (K @ K)


def rotation_error(R):
    """Return max-norm of ``R^T R - I`` over the stack."""
    R = np.asarray(R, dtype=float)
    return float(np.max(np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3)), initial=0.0))


def as_rotation(m, tol=ROT_TOL):
    """Validate ``m`` as a rotation (or stack) and return it as a float array."""
    m = np.asarray(m, dtype=float)
    if m.shape[-2:] != (3, 3):
        raise InvalidInput(f"expected 3x3 matrices, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInput("rotation has non-finite entries")
    err = rotation_error(m)
    if err > tol:
        raise InvalidInput(f"matrix is not orthonormal (|R^T R - I| = {err:.3e})")
    if np.any(np.linalg.det(m) <= 0.0):
        raise InvalidInput("matrix has non-positive determinant")
    return m


def project_to_so3(m):
    """Orthonormal polar factor of ``m``; requires ``det(m) > 0``."""
    m = np.asarray(m, dtype=float)
    det = np.linalg.det(m)
    if np.any(~(det > 0.0)):
        raise OrientationFlip("cannot project a matrix with det <= 0 onto SO(3)")
    U, _, Vt = np.linalg.svd(m)
    return U @ Vt


@dataclass(frozen=True, eq=False)
class SpdTensor:
    """Symmetric positive-definite 3x3 tensor such as an inertia matrix.

    Positivity is checked once with a Cholesky factorization; the inverse
    is cached because every Hamiltonian evaluation needs it.
    """

    matrix: np.ndarray
    inverse: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape == (3,):
            m = np.diag(m)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise InvalidInput("SPD tensor must be a finite 3x3 matrix or diagonal triple")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > 1e-12 * scale:
            raise InvalidInput("tensor is not symmetric")
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError as exc:
            raise InvalidInput("tensor is not positive definite") from exc
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        inv = np.linalg.inv(m)
        inv = 0.5 * (inv + inv.T)
        inv.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "inverse", inv)

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    def apply(self, v):
        return np.asarray(v, dtype=float) @ self.matrix.T

    def solve(self, b):
        return spd_solve(self, b)

    def is_isotropic(self, tol=0.0):
        d = self.matrix[0, 0]
        return bool(np.max(np.abs(self.matrix - d * np.eye(3))) <= tol)


def spd_solve(T, b):
    """Solve ``T x = b`` for an :class:`SpdTensor` (``b`` may be stacked)."""
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        return np.linalg.solve(T.matrix, b)
    flat = b.reshape(-1, 3).T
    return np.linalg.solve(T.matrix, flat).T.reshape(b.shape)


def conjugate(R, M):
    """Return ``R M R^T`` for a stack of rotations and a fixed matrix."""
    return R @ M @ np.swapaxes(R, -1, -2)


def tangent_part(zeta, v):
    """Component of ``v`` orthogonal to the unit vector ``zeta``."""
    zeta = np.asarray(zeta, dtype=float)
    v = np.asarray(v, dtype=float)
    return v - np.sum(v * zeta, axis=-1, keepdims=True) * zeta


def require_unit(zeta, tol=ROT_TOL):
    zeta = np.asarray(zeta, dtype=float)
    err = np.max(np.abs(np.linalg.norm(zeta, axis=-1) - 1.0), initial=0.0)
    if not err <= tol:
        raise PreconditionError(f"vector is not unit length (deviation {err:.3e})")
    return zeta


def require_tangent(zeta, v, tol=ROT_TOL, name="vector"):
    v = np.asarray(v, dtype=float)
    scale = np.maximum(1.0, np.linalg.norm(v, axis=-1))
    dev = np.max(np.abs(np.sum(zeta * v, axis=-1)) / scale, initial=0.0)
    if not dev <= tol:
        raise PreconditionError(f"{name} is not tangent to the sphere (|<v, zeta>| = {dev:.3e})")
    return v
