"""Local-coordinate evaluator for reduction formulas on a trivial bundle.

The total space is ``P = M x F x G`` with adapted coordinates
``(x^i, s^a, y^alpha)``, where ``y`` are normal coordinates on ``G`` and ``G``
acts by left multiplication.  Points of the unreduced momentum space carry
``p^i_a`` and ``p^i_alpha``; reduced points carry ``sigma^i_a`` and
``mu^i_alpha``.

All coefficient functions must broadcast over leading axes, e.g.
``A_s(x, s)`` maps ``x: (..., n)`` and ``s: (..., dF)`` to ``(..., dG, dF)``.
That lets one call evaluate every finite-difference stencil point of every
sample at once.

Index conventions:

* ``c[g, a, b]`` is the structure constant ``c^g_{ab}``.
* ``A_x[..., alpha, i]`` and ``A_s[..., alpha, a]`` are the horizontal-lift
  coefficients at the identity, ``d/dx -> d/dx + A^alpha d/dy^alpha``.
* ``Lam_s[..., a, i]`` and ``Lam_g[..., alpha, i]`` are the Ehresmann
  connection coefficients at the identity.
* ``Gamma[..., k, i, j]`` is the Christoffel symbol ``Gamma^k_{ij}`` on ``M``.
* Curvature arrays ``B[..., g, u, v]`` use combined indices ``u, v`` running
  over ``(x^1..x^n, s^1..s^dF)``.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ChartDomain, InvalidInput, PolystrandError, PreconditionError


# --------------------------------------------------------------------------
# finite differences


@dataclass(frozen=True)
class FdScheme:
    """Central difference stencil: step ``h`` and order 2 or 4."""

    h: float = 1e-6
    order: int = 2

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidInput("finite-difference step must be positive")
        if self.order not in (2, 4):
            raise InvalidInput("finite-difference order must be 2 or 4")

    def stencil(self):
        if self.order == 2:
            return np.array([1.0, -1.0]), np.array([0.5, -0.5])
        return np.array([2.0, 1.0, -1.0, -2.0]), np.array([-1.0, 8.0, -8.0, 1.0]) / 12.0


DEFAULT_FD = FdScheme()


def fd_partials(fun, z, indices, scheme=DEFAULT_FD):
    """Central-difference partials of ``fun`` at ``z`` along coordinate ``indices``.

    ``z`` has shape ``(..., D)`` and ``fun`` maps ``(..., D)`` to
    ``(..., *out)``.  Returns ``(..., *out, K)`` with ``K = len(indices)``.
    """
    z = np.asarray(z, dtype=float)
    indices = np.asarray(indices, dtype=int)
    K = indices.size
    D = z.shape[-1]
    offs, wts = scheme.stencil()
    m = offs.size
    if K == 0:
        out = np.asarray(fun(z))
        return np.zeros(out.shape + (0,))
    E = np.zeros((K, m, D))
    E[np.arange(K), :, indices] = offs * scheme.h
    E = E.reshape((K, m) + (1,) * (z.ndim - 1) + (D,))
    vals = np.asarray(fun(z[None, None] + E))
    deriv = np.tensordot(wts, vals, axes=([0], [1])) / scheme.h
    return np.moveaxis(deriv, 0, -1)


# --------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class PointU:
    """Unreduced point ``(x, s, y, p_a, p_alpha)``; arrays may carry batch axes."""

    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    pa: np.ndarray
    pg: np.ndarray


@dataclass(frozen=True)
class PointR:
    """Reduced point ``(x, s, sigma, mu)``; arrays may carry batch axes."""

    x: np.ndarray
    s: np.ndarray
    sigma: np.ndarray
    mu: np.ndarray


@dataclass(frozen=True)
class SectionJet:
    """First derivatives along ``x^i`` of a section through a point.

    ``d_s[..., i, a] = ds^a/dx^i`` and ``d_y[..., i, alpha] = dy^alpha/dx^i``.
    Momentum derivatives are indexed ``[..., i, j, A]`` meaning
    ``d(p^j_A)/dx^i``; for reduced sections ``d_pa`` holds sigma and
    ``d_pg`` holds mu, and ``d_y`` is unused.
    """

    d_s: np.ndarray
    d_pa: np.ndarray
    d_pg: np.ndarray
    d_y: Optional[np.ndarray] = None


@dataclass(frozen=True)
class PoissonFormSpec:
    """Affine form ``f^i = sigma^i_a Y^a + mu^i_alpha xi^alpha + omega^i``.

    Each field is ``None`` (zero) or a broadcasting function of ``(x, s)``
    returning shapes ``(..., dF)``, ``(..., dG)`` and ``(..., n)``.
    """

    Y: Optional[Callable] = None
    xi: Optional[Callable] = None
    omega: Optional[Callable] = None


# --------------------------------------------------------------------------
# chart specification


def _zeros_fn(shape):
    def fn(x, s, *rest):
        lead = np.broadcast_shapes(np.shape(x)[:-1], np.shape(s)[:-1])
        return np.zeros(lead + shape)

    return fn


def abelian_translate(y, w):
    return np.asarray(w, dtype=float) - np.asarray(y, dtype=float)


@dataclass(frozen=True, eq=False)
class ChartSpec:
    """Coefficient bundle describing a trivial bundle with a group action."""

    n: int
    dF: int
    dG: int
    c: np.ndarray
    A_x: Callable
    A_s: Callable
    Lam_s: Optional[Callable] = None
    Lam_g: Optional[Callable] = None
    Gamma: Optional[Callable] = None
    translate: Optional[Callable] = None
    z_exact: Optional[Callable] = None
    compatible: bool = True
    fd: FdScheme = DEFAULT_FD
    name: str = ""

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.shape != (self.dG,) * 3:
            raise InvalidInput(f"structure constants must have shape {(self.dG,) * 3}")
        if np.max(np.abs(c + np.swapaxes(c, 1, 2)), initial=0.0) > 1e-12:
            raise InvalidInput("structure constants are not antisymmetric")
        if jacobi_defect(c) > 1e-10:
            raise InvalidInput("structure constants violate the Jacobi identity")
        object.__setattr__(self, "c", c)
        if self.Lam_s is None:
            object.__setattr__(self, "Lam_s", _zeros_fn((self.dF, self.n)))
        if self.Lam_g is None:
            if not self.compatible:
                raise InvalidInput("Lam_g is required for a spec not flagged compatible")

            def lam_g(x, s, _spec=self):
                return _spec.A_x(x, s) + _spec.A_s(x, s) @ _spec.Lam_s(x, s)

            object.__setattr__(self, "Lam_g", lam_g)
        if self.Gamma is None:
            n = self.n

            def gamma(x):
                return np.zeros(np.shape(x)[:-1] + (n, n, n))

            object.__setattr__(self, "Gamma", gamma)
        if self.translate is None:
            if np.any(c != 0.0):
                raise InvalidInput("non-abelian groups need an explicit translate map")
            object.__setattr__(self, "translate", abelian_translate)

    @property
    def abelian(self):
        return not np.any(self.c != 0.0)

    # sizes and flat layouts
    @property
    def size_u(self):
        return self.n + self.dF + self.dG + self.n * (self.dF + self.dG)

    @property
    def size_r(self):
        return self.n + self.dF + self.n * (self.dF + self.dG)

    def slices_u(self):
        n, dF, dG = self.n, self.dF, self.dG
        i0 = n + dF + dG
        return (
            slice(0, n),
            slice(n, n + dF),
            slice(n + dF, i0),
            slice(i0, i0 + n * dF),
            slice(i0 + n * dF, i0 + n * (dF + dG)),
        )

    def slices_r(self):
        n, dF = self.n, self.dF
        i0 = n + dF
        return (slice(0, n), slice(n, i0), slice(i0, i0 + n * dF), slice(i0 + n * dF, self.size_r))

    def flat_u(self, u):
        lead = np.broadcast_shapes(
            np.shape(u.x)[:-1], np.shape(u.s)[:-1], np.shape(u.y)[:-1], np.shape(u.pa)[:-2], np.shape(u.pg)[:-2]
        )
        parts = [
            np.broadcast_to(u.x, lead + (self.n,)),
            np.broadcast_to(u.s, lead + (self.dF,)),
            np.broadcast_to(u.y, lead + (self.dG,)),
            np.broadcast_to(u.pa, lead + (self.n, self.dF)).reshape(lead + (-1,)),
            np.broadcast_to(u.pg, lead + (self.n, self.dG)).reshape(lead + (-1,)),
        ]
        return np.concatenate([np.asarray(p, dtype=float) for p in parts], axis=-1)

    def unflat_u(self, z):
        sx, ss, sy, spa, spg = self.slices_u()
        lead = z.shape[:-1]
        return PointU(
            z[..., sx],
            z[..., ss],
            z[..., sy],
            z[..., spa].reshape(lead + (self.n, self.dF)),
            z[..., spg].reshape(lead + (self.n, self.dG)),
        )

    def flat_r(self, r):
        lead = np.broadcast_shapes(
            np.shape(r.x)[:-1], np.shape(r.s)[:-1], np.shape(r.sigma)[:-2], np.shape(r.mu)[:-2]
        )
        parts = [
            np.broadcast_to(r.x, lead + (self.n,)),
            np.broadcast_to(r.s, lead + (self.dF,)),
            np.broadcast_to(r.sigma, lead + (self.n, self.dF)).reshape(lead + (-1,)),
            np.broadcast_to(r.mu, lead + (self.n, self.dG)).reshape(lead + (-1,)),
        ]
        return np.concatenate([np.asarray(p, dtype=float) for p in parts], axis=-1)

    def unflat_r(self, z):
        sx, ss, ssig, smu = self.slices_r()
        lead = z.shape[:-1]
        return PointR(
            z[..., sx],
            z[..., ss],
            z[..., ssig].reshape(lead + (self.n, self.dF)),
            z[..., smu].reshape(lead + (self.n, self.dG)),
        )

    # group-dependent coefficients
    def Z(self, y):
        """Left-trivialization matrix ``Z[..., beta, alpha]``; closed form if provided."""
        if self.z_exact is not None:
            return np.asarray(self.z_exact(np.asarray(y, dtype=float)), dtype=float)
        return z_matrix(self, y)

    def Z_inv(self, y):
        if self.abelian and self.z_exact is None:
            y = np.asarray(y, dtype=float)
            return np.broadcast_to(np.eye(self.dG), y.shape[:-1] + (self.dG, self.dG))
        return np.linalg.inv(self.Z(y))

    def A_x_at(self, x, s, y):
        return self.Z_inv(y) @ self.A_x(x, s)

    def A_s_at(self, x, s, y):
        return self.Z_inv(y) @ self.A_s(x, s)

    def Lam_g_at(self, x, s, y):
        return self.Z_inv(y) @ self.Lam_g(x, s)

    def A_full(self, x, s):
        """``A[..., alpha, u]`` over combined coordinates ``(x, s)``."""
        return np.concatenate([self.A_x(x, s), self.A_s(x, s)], axis=-1)


def jacobi_defect(c):
    """Max violation of the Jacobi identity for structure constants ``c[g, a, b]``."""
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        return 0.0
    # [[e_a, e_b], e_d] = c^g_{ab} c^h_{gd} e_h
    t = np.einsum("gab,hgd->habd", c, c)
    cyc = t + np.transpose(t, (0, 2, 3, 1)) + np.transpose(t, (0, 3, 1, 2))
    return float(np.max(np.abs(cyc)))


def compatibility_residual(spec, x, s):
    """``Lam^alpha_i - A^alpha_i - A^alpha_b Lam^b_i`` at the identity."""
    return spec.Lam_g(x, s) - spec.A_x(x, s) - spec.A_s(x, s) @ spec.Lam_s(x, s)


# --------------------------------------------------------------------------
# group chart


def z_matrix(spec, y, scheme=None):
    """``Z[..., beta, alpha]`` with ``g^-1 dg/dy^alpha = Z^beta_alpha B_beta``.

    Computed by central differences of the chart map ``w -> coords(g(y)^-1 g(w))``
    at ``w = y``.
    """
    scheme = scheme or spec.fd
    y = np.asarray(y, dtype=float)
    try:
        Zt = fd_partials(lambda w: spec.translate(y, w), y, np.arange(spec.dG), scheme)
    except PolystrandError as exc:
        raise ChartDomain(f"group chart failed near y: {exc}") from exc
    if not np.all(np.isfinite(Zt)):
        raise ChartDomain("group chart produced non-finite values")
    return Zt


# --------------------------------------------------------------------------
# projection and its differential


def kappa_local(spec, u):
    """Reduce an unreduced point: ``sigma = p_a + p_alpha A(y)``, ``mu = Z(y)^-T p_alpha``."""
    Zinv = spec.Z_inv(u.y)
    A_s = Zinv @ spec.A_s(u.x, u.s)
    pg = np.asarray(u.pg, dtype=float)
    return PointR(
        x=np.asarray(u.x, dtype=float),
        s=np.asarray(u.s, dtype=float),
        sigma=u.pa + pg @ A_s,
        mu=pg @ Zinv,
    )


def _lie_coupling(spec, mu, A):
    """``T[..., j, u, alpha] = mu^j_gamma c^gamma_{beta alpha} A^beta_u``."""
    return np.einsum("...jg,gba,...bu->...jua", mu, spec.c, A)


def dkappa_local(spec, u, tangent):
    """Push a tangent vector at ``u`` (with ``y = 0``) through the projection.

    ``tangent`` is a :class:`PointU` holding the components along each
    coordinate; the result is a :class:`PointR` of components.
    """
    if np.max(np.abs(u.y), initial=0.0) != 0.0:
        raise PreconditionError("the tabulated differential is only valid at y = 0")
    n, dF = spec.n, spec.dF
    mu = np.asarray(u.pg, dtype=float)
    A_s = spec.A_s(u.x, u.s)
    xs = np.concatenate([u.x, u.s], axis=-1)
    dA = fd_partials(lambda z: spec.A_s(z[..., :n], z[..., n:]), xs, np.arange(n + dF), spec.fd)
    base = np.concatenate([tangent.x, tangent.s], axis=-1)
    # base directions: mu^j_gamma dA^gamma_b/du v^u
    d_sigma = np.einsum("...jg,...gbu,...u->...jb", mu, dA, base)
    d_sigma = d_sigma + tangent.pa + tangent.pg @ A_s
    # group directions: -1/2 mu^j_gamma c^gamma_{beta alpha} (A^beta_b d/dsigma + d/dmu_beta)
    K = -0.5 * np.einsum("...jg,gba,...a->...jb", mu, spec.c, tangent.y)
    d_sigma = d_sigma + K @ A_s
    d_mu = tangent.pg + K
    return PointR(x=tangent.x, s=tangent.s, sigma=d_sigma, mu=d_mu)


def check_invariance(spec, E, u):
    """Max over alpha of ``dE/dy^alpha + 1/2 c^g_{b alpha} p^i_g dE/dp^i_b``.

    Vanishes for functions invariant under the left action near ``y = 0``.
    """
    z = spec.flat_u(u)
    _, _, sy, _, spg = spec.slices_u()
    idx = np.r_[np.arange(sy.start, sy.stop), np.arange(spg.start, spg.stop)]
    d = fd_partials(lambda w: E(spec.unflat_u(w)), z, idx, spec.fd)
    dG = spec.dG
    dE_dy = d[..., :dG]
    dE_dpg = d[..., dG:].reshape(d.shape[:-1] + (spec.n, dG))
    res = dE_dy + 0.5 * np.einsum("gba,...ig,...ib->...a", spec.c, u.pg, dE_dpg)
    return np.max(np.abs(res), axis=-1)


# --------------------------------------------------------------------------
# forms and lifts


def _eval_or_zero(fn, x, s, size):
    lead = np.broadcast_shapes(np.shape(x)[:-1], np.shape(s)[:-1])
    if fn is None:
        return np.zeros(lead + (size,))
    return np.broadcast_to(fn(x, s), lead + (size,))


def form_coefficients(spec, f, x, s):
    """``(Y, xi, omega)`` at ``(x, s)`` with zeros for missing parts."""
    return (
        _eval_or_zero(f.Y, x, s, spec.dF),
        _eval_or_zero(f.xi, x, s, spec.dG),
        _eval_or_zero(f.omega, x, s, spec.n),
    )


def form_value(spec, f, r):
    """Components ``f^i`` of an affine form at a reduced point."""
    Y, xi, om = form_coefficients(spec, f, r.x, r.s)
    return np.einsum("...ia,...a->...i", r.sigma, Y) + np.einsum("...ia,...a->...i", r.mu, xi) + om


def lift_form(spec, f):
    """Invariant unreduced form ``F = f o kappa`` as a function of :class:`PointU`."""
    return lambda u: form_value(spec, f, kappa_local(spec, u))


def lift_function(spec, h):
    """Invariant unreduced function ``H = h o kappa``."""
    return lambda u: h(kappa_local(spec, u))


# --------------------------------------------------------------------------
# brackets


def _all_partials_u(spec, fun, u):
    z = spec.flat_u(u)
    return fd_partials(lambda w: fun(spec.unflat_u(w)), z, np.arange(spec.size_u), spec.fd)


def _all_partials_r(spec, fun, r):
    z = spec.flat_r(r)
    return fd_partials(lambda w: fun(spec.unflat_r(w)), z, np.arange(spec.size_r), spec.fd)


def _split_u(spec, d):
    """Split ``(..., D)`` partials into x, s, y, p_a, p_alpha blocks."""
    sx, ss, sy, spa, spg = spec.slices_u()
    lead = d.shape[:-1]
    return (
        d[..., sx],
        d[..., ss],
        d[..., sy],
        d[..., spa].reshape(lead + (spec.n, spec.dF)),
        d[..., spg].reshape(lead + (spec.n, spec.dG)),
    )


def _split_r(spec, d):
    sx, ss, ssig, smu = spec.slices_r()
    lead = d.shape[:-1]
    return (
        d[..., sx],
        d[..., ss],
        d[..., ssig].reshape(lead + (spec.n, spec.dF)),
        d[..., smu].reshape(lead + (spec.n, spec.dG)),
    )


def bracket_unreduced(spec, F, H, u):
    """Canonical bracket of a Poisson (n-1)-form ``F`` (components ``F^i``) and a function ``H``.

    ``{F,H} = dF^i/dq^A dH/dp^i_A - X^A dH/dq^A`` with ``q = (s, y)`` and
    ``X^A`` the common value of ``dF^i/dp^i_A`` (no sum over ``i``), so the
    vector field generating ``F`` acts on ``H`` once whatever ``n`` is.
    """
    dH = _all_partials_u(spec, H, u)
    dF = _all_partials_u(spec, F, u)  # (..., n_i, D)
    _, Hs, Hy, Hpa, Hpg = _split_u(spec, dH)
    _, Fs, Fy, Fpa, Fpg = _split_u(spec, dF)
    # For Poisson forms dF^i/dp^j_A = delta^i_j X^A; X^A is the common diagonal value.
    Xa = np.mean(np.einsum("...iia->...ia", Fpa), axis=-2)
    Xg = np.mean(np.einsum("...iia->...ia", Fpg), axis=-2)
    out = np.einsum("...ia,...ia->...", Fs, Hpa) - np.einsum("...a,...a->...", Xa, Hs)
    out = out + np.einsum("...ia,...ia->...", Fy, Hpg) - np.einsum("...a,...a->...", Xg, Hy)
    return out


def _reduced_partials(spec, h, r):
    d = _all_partials_r(spec, h, r)
    return _split_r(spec, d)


def _form_base_partials(spec, f, r):
    """``df^i/dx^j`` and ``df^i/ds^a`` at fixed momenta: ``(..., n_i, n)`` and ``(..., n_i, dF)``."""
    n = spec.n
    sigma, mu = np.asarray(r.sigma), np.asarray(r.mu)
    xs = np.concatenate([r.x, r.s], axis=-1)

    def fn(z):
        return form_value(spec, f, PointR(z[..., :n], z[..., n:], sigma, mu))

    d = fd_partials(fn, xs, np.arange(n + spec.dF), spec.fd)
    return d[..., :n], d[..., n:]


def bracket_sigma(spec, f, h, r, dh=None):
    """Connection-covariantized canonical part of the reduced bracket."""
    _, hs, hsig, hmu = dh if dh is not None else _reduced_partials(spec, h, r)
    Y, xi, _ = form_coefficients(spec, f, r.x, r.s)
    _, fs = _form_base_partials(spec, f, r)
    T = _lie_coupling(spec, r.mu, spec.A_s(r.x, r.s))  # (..., j, a, alpha)
    first = np.einsum("...ia,...ia->...", fs + np.einsum("...iaA,...A->...ia", T, xi), hsig)
    second = np.einsum("...a,...a->...", Y, hs) + np.einsum("...a,...iaA,...iA->...", Y, T, hmu)
    return first - second


def bracket_lie_poisson(spec, xi, h, r, dh=None):
    """``-<mu, [xi, dh/dmu]> = mu^i_g c^g_{b a} xi^a dh/dmu^i_b``.

    ``xi`` is an array ``(..., dG)`` or a function of ``(x, s)``.
    """
    if callable(xi):
        xi = xi(r.x, r.s)
    _, _, _, hmu = dh if dh is not None else _reduced_partials(spec, h, r)
    return np.einsum("...ig,gba,...a,...ib->...", r.mu, spec.c, xi, hmu)


def curvature_coefficients(spec, x, s):
    """Curvature ``B[..., g, u, v] = d_u A_v - d_v A_u + c^g_{b a} A^b_u A^a_v``.

    ``u, v`` run over the combined coordinates ``(x^i, s^a)``.
    """
    n = spec.n
    xs = np.concatenate([np.asarray(x, dtype=float), np.asarray(s, dtype=float)], axis=-1)
    A = spec.A_full(x, s)
    dA = fd_partials(lambda z: spec.A_full(z[..., :n], z[..., n:]), xs, np.arange(xs.shape[-1]), spec.fd)
    # dA[..., g, v, u] = d_u A^g_v
    curl = np.swapaxes(dA, -1, -2) - dA
    return curl + np.einsum("gba,...bu,...av->...guv", spec.c, A, A)


def bracket_curvature(spec, Y, h, r, dh=None):
    """``-<mu, B(Y, dh/dsigma)>`` with the fiber block of the curvature."""
    if callable(Y):
        Y = Y(r.x, r.s)
    _, _, hsig, _ = dh if dh is not None else _reduced_partials(spec, h, r)
    n = spec.n
    B = curvature_coefficients(spec, r.x, r.s)[..., n:, n:]
    return -np.einsum("...ig,...gab,...a,...ib->...", r.mu, B, Y, hsig)


def bracket_reduced(spec, f, h, r):
    """Full reduced bracket: covariant canonical part, Lie-Poisson part and curvature part."""
    dh = _reduced_partials(spec, h, r)
    Y, xi, _ = form_coefficients(spec, f, r.x, r.s)
    return (
        bracket_sigma(spec, f, h, r, dh=dh)
        + bracket_lie_poisson(spec, xi, h, r, dh=dh)
        + bracket_curvature(spec, Y, h, r, dh=dh)
    )


# --------------------------------------------------------------------------
# horizontal differentials


def _christoffel_parts(spec, x):
    G = spec.Gamma(x)
    trace = np.einsum("...kik->...i", G)
    return G, trace


def dh_unreduced(spec, F, u):
    """Horizontal differential of an (n-1)-form on the unreduced space (coefficient of the volume)."""
    n, dF, dG = spec.n, spec.dF, spec.dG
    dF_ = _all_partials_u(spec, F, u)
    Fx, Fs, Fy, Fpa, Fpg = _split_u(spec, dF_)  # Fpa[..., i, j, a] = dF^i/dp^j_a
    x, s, y = u.x, u.s, u.y
    Ls = spec.Lam_s(x, s)
    Lg = spec.Lam_g_at(x, s, y)
    xs = np.concatenate([x, s], axis=-1)
    dLs = fd_partials(lambda z: spec.Lam_s(z[..., :n], z[..., n:]), xs, np.arange(n, n + dF), spec.fd)
    dLg = fd_partials(lambda z: spec.Lam_g_at(z[..., :n], z[..., n:], y), xs, np.arange(n, n + dF), spec.fd)
    dLg_y = fd_partials(lambda w: spec.Lam_g_at(x, s, w), y, np.arange(dG), spec.fd)
    G, tr = _christoffel_parts(spec, x)
    pa, pg = u.pa, u.pg

    out = np.einsum("...ii->...", Fx)
    out = out + np.einsum("...ai,...ia->...", Ls, Fs)
    out = out + np.einsum("...gi,...ig->...", Lg, Fy)
    Ca = (
        -np.einsum("...bia,...jb->...ija", dLs, pa)
        - np.einsum("...gia,...jg->...ija", dLg, pg)
        + np.einsum("...jik,...ka->...ija", G, pa)
        - np.einsum("...i,...ja->...ija", tr, pa)
    )
    Cg = (
        -np.einsum("...gia,...jg->...ija", dLg_y, pg)
        + np.einsum("...jik,...ka->...ija", G, pg)
        - np.einsum("...i,...ja->...ija", tr, pg)
    )
    out = out + np.einsum("...ija,...ija->...", Ca, Fpa) + np.einsum("...ija,...ija->...", Cg, Fpg)
    return out


def dh_reduced(spec, f, r):
    """Horizontal differential of an affine form on the reduced space."""
    n, dF = spec.n, spec.dF
    Y, xi, _ = form_coefficients(spec, f, r.x, r.s)
    fx, fs = _form_base_partials(spec, f, r)
    Ls = spec.Lam_s(r.x, r.s)
    Lg = spec.Lam_g(r.x, r.s)
    xs = np.concatenate([r.x, r.s], axis=-1)
    dLs = fd_partials(lambda z: spec.Lam_s(z[..., :n], z[..., n:]), xs, np.arange(n, n + dF), spec.fd)
    G, tr = _christoffel_parts(spec, r.x)
    sigma, mu = r.sigma, r.mu

    out = np.einsum("...ii->...", fx) + np.einsum("...ai,...ia->...", Ls, fs)
    Csig = (
        -np.einsum("...bia,...ib->...ia", dLs, sigma)
        + np.einsum("...iik,...ka->...ia", G, sigma)
        - np.einsum("...i,...ia->...ia", tr, sigma)
    )
    Cmu = (
        np.einsum("...ig,gba,...bi->...ia", mu, spec.c, Lg)
        + np.einsum("...iik,...ka->...ia", G, mu)
        - np.einsum("...i,...ia->...ia", tr, mu)
    )
    out = out + np.einsum("...ia,...a->...", Csig, Y) + np.einsum("...ia,...a->...", Cmu, xi)
    return out


def curvature_lambda_term(spec, Y, r):
    """``<mu, B(Y, Lam_bar)>`` where ``Lam_bar_i = d/dx^i + Lam^b_i d/ds^b``."""
    if callable(Y):
        Y = Y(r.x, r.s)
    n = spec.n
    B = curvature_coefficients(spec, r.x, r.s)
    Ls = spec.Lam_s(r.x, r.s)
    B_ai = B[..., n:, :n]
    B_ab = B[..., n:, n:]
    lifted = B_ai + np.einsum("...gab,...bi->...gai", B_ab, Ls)
    return np.einsum("...ig,...a,...gai->...", r.mu, Y, lifted)


# --------------------------------------------------------------------------
# field-equation residuals


def hamilton_cartan_residual(spec, H, u, jet):
    """Residuals of the local Hamilton-Cartan equations at ``u``.

    Returns ``(holo, hor)`` with ``holo[..., i, A] = dH/dp^i_A - dq^A/dx^i + Lam^A_i``
    and ``hor[..., A] = dH/dq^A + d_i p^i_A + dLam^B_i/dq^A p^i_B``, where
    ``q = (s, y)`` collects all fiber coordinates.
    """
    dF, dG = spec.dF, spec.dG
    dH = _all_partials_u(spec, H, u)
    _, Hs, Hy, Hpa, Hpg = _split_u(spec, dH)
    x = u.x
    q = np.concatenate([u.s, u.y], axis=-1)

    def lam_full(qq):
        s_, y_ = qq[..., :dF], qq[..., dF:]
        return np.concatenate([spec.Lam_s(x, s_), spec.Lam_g_at(x, s_, y_)], axis=-2)

    Lam = lam_full(q)  # (..., A, i)
    dLam = fd_partials(lam_full, q, np.arange(dF + dG), spec.fd)  # (..., B, i, A)
    Hp = np.concatenate([Hpa, Hpg], axis=-1)
    dq = np.concatenate([jet.d_s, jet.d_y], axis=-1)
    holo = Hp - dq + np.swapaxes(Lam, -1, -2)
    p = np.concatenate([u.pa, u.pg], axis=-1)
    dp = np.concatenate([jet.d_pa, jet.d_pg], axis=-1)
    hor = np.concatenate([Hs, Hy], axis=-1) + np.einsum("...iiA->...A", dp)
    hor = hor + np.einsum("...BiA,...iB->...A", dLam, p)
    return holo, hor


def pp_residuals(spec, h, r, jet):
    """Residuals ``(ver, holo, hor)`` of the local reduced field equations at ``r``.

    ``ver[..., alpha]``, ``holo[..., i, b]`` and ``hor[..., a]`` vanish along
    solutions.  ``jet.d_pa`` and ``jet.d_pg`` hold derivatives of sigma and mu.
    """
    n = spec.n
    _, hs, hsig, hmu = _reduced_partials(spec, h, r)
    x, s, sigma, mu = r.x, r.s, r.sigma, r.mu
    A = spec.A_full(x, s)
    Ax, As = A[..., :, :n], A[..., :, n:]
    c = spec.c
    d_s = jet.d_s

    ver = np.einsum("...iia->...a", jet.d_pg)
    ver = ver - np.einsum("...ig,gba,...bi->...a", mu, c, Ax)
    ver = ver - np.einsum("...ig,gba,...bc,...ic->...a", mu, c, As, d_s)
    ver = ver - np.einsum("...ig,gba,...ib->...a", mu, c, hmu)

    holo = hsig - d_s + np.swapaxes(spec.Lam_s(x, s), -1, -2)

    xs = np.concatenate([x, s], axis=-1)
    dLs = fd_partials(lambda z: spec.Lam_s(z[..., :n], z[..., n:]), xs, np.arange(n, n + spec.dF), spec.fd)
    B = curvature_coefficients(spec, x, s)
    hor = hs + np.einsum("...ig,gba,...bc,...ia->...c", mu, c, As, hmu)
    hor = hor + np.einsum("...iia->...a", jet.d_pa)
    hor = hor + np.einsum("...bia,...ib->...a", dLs, sigma)
    hor = hor + np.einsum("...ig,...gai->...a", mu, B[..., n:, :n])
    hor = hor + np.einsum("...ig,...gab,...ib->...a", mu, B[..., n:, n:], d_s)
    return ver, holo, hor


def total_derivative_form(spec, f, r, jet):
    """``sum_i d/dx^i (f^i o section)`` for an affine form along a reduced section."""
    Y, xi, _ = form_coefficients(spec, f, r.x, r.s)
    fx, fs = _form_base_partials(spec, f, r)
    out = np.einsum("...ii->...", fx) + np.einsum("...ia,...ia->...", fs, jet.d_s)
    out = out + np.einsum("...iia,...a->...", jet.d_pa, Y) + np.einsum("...iia,...a->...", jet.d_pg, xi)
    return out


def reduced_identity_local(spec, f, h, r, jet):
    """``{f,h} - [d(f o section) - d^h f + <mu, B(Y, Lam_bar)>]`` at a section point."""
    Y, _, _ = form_coefficients(spec, f, r.x, r.s)
    rhs = total_derivative_form(spec, f, r, jet) - dh_reduced(spec, f, r) + curvature_lambda_term(spec, Y, r)
    return bracket_reduced(spec, f, h, r) - rhs


def unreduced_identity_local(spec, F, H, u, jet):
    """``{F,H} - [d(F o section) - d^h F]`` at a point of an unreduced section."""
    dF_ = _all_partials_u(spec, F, u)
    Fx, Fs, Fy, Fpa, Fpg = _split_u(spec, dF_)
    total = np.einsum("...ii->...", Fx)
    total = total + np.einsum("...ia,...ia->...", Fs, jet.d_s) + np.einsum("...ia,...ia->...", Fy, jet.d_y)
    total = total + np.einsum("...ija,...ija->...", Fpa, jet.d_pa) + np.einsum("...ija,...ija->...", Fpg, jet.d_pg)
    return bracket_unreduced(spec, F, H, u) - (total - dh_unreduced(spec, F, u))
