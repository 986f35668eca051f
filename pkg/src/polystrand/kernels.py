"""Hot loops of the method-of-lines right-hand sides.

Each kernel exists twice: a node-by-node numba version and a vectorized
numpy version with identical arithmetic.  The numba path is used when numba
imports and the environment variable ``POLYSTRAND_DISABLE_NUMBA`` is unset
(or ``0``); otherwise the numpy path is used.  Both paths are always
importable as ``numpy_kernels`` and ``numba_kernels`` for testing.
"""

import os
from types import SimpleNamespace

import numpy as np

_FLAG = "POLYSTRAND_DISABLE_NUMBA"

# central-difference weights on offsets +1, +2 (antisymmetric stencils)
_W2 = (0.5, 0.0)
_W4 = (2.0 / 3.0, -1.0 / 12.0)


def _weights(order):
    if order == 2:
        return _W2
    if order == 4:
        return _W4
    raise ValueError("difference order must be 2 or 4")


# --------------------------------------------------------------------------
# numpy backend


def _np_diff(f, ds, order):
    w1, w2 = _weights(order)
    out = w1 * (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0))
    if w2 != 0.0:
        out = out + w2 * (np.roll(f, -2, axis=0) - np.roll(f, 2, axis=0))
    return out / ds


def _np_cross(a, b):
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def _np_unreduced_rates(R, p_t, Iinv, J, e, chi, ds, order):
    N = R.shape[0]
    dR = _np_diff(R.reshape(N, 9), ds, order).reshape(N, 3, 3)
    M = dR @ np.swapaxes(R, -1, -2)
    w_s = 0.5 * np.stack([M[:, 2, 1] - M[:, 1, 2], M[:, 0, 2] - M[:, 2, 0], M[:, 1, 0] - M[:, 0, 1]], axis=-1)
    # p_s = -R J R^T w_s and w_t = R I^-1 R^T p_t
    W_s = np.einsum("nji,nj->ni", R, w_s)
    p_s = -np.einsum("nij,nj->ni", R, W_s @ J.T)
    P_t = np.einsum("nji,nj->ni", R, p_t)
    w_t = np.einsum("nij,nj->ni", R, P_t @ Iinv.T)
    Rchi = R @ chi
    torque = e * np.stack([-Rchi[:, 1], Rchi[:, 0], np.zeros(N)], axis=-1)  # e3 x R chi
    dp_t = -_np_diff(p_s, ds, order) + torque
    return w_t, dp_t


def _np_reduced_rates(zeta, sigma, mu, xi, Iinv, J, Jinv, e, chi, ds, order):
    z_s = _np_diff(zeta, ds, order)
    Om_s = xi[:, None] * zeta - _np_cross(zeta, z_s)
    P_s = -(Om_s @ J.T)
    sig_s = _np_cross(zeta, P_s)
    mu_s = np.sum(zeta * P_s, axis=-1)
    P_t = mu[:, None] * zeta - _np_cross(zeta, sigma)
    Om_t = P_t @ Iinv.T
    z_t = _np_cross(zeta, Om_t)
    eta = np.sum(zeta * Om_t, axis=-1)

    d_mu = -_np_diff(mu_s, ds, order)
    normal = np.sum(z_t * sigma, axis=-1) + np.sum(z_s * sig_s, axis=-1)
    chi_par = chi[None, :] - zeta * (zeta @ chi)[:, None]
    d_sig = (
        -_np_diff(sig_s, ds, order)
        - eta[:, None] * _np_cross(zeta, sigma)
        - xi[:, None] * _np_cross(zeta, sig_s)
        - normal[:, None] * zeta
        - e * chi_par
    )
    d_xi = _np_diff(eta, ds, order) - np.sum(zeta * _np_cross(z_s, z_t), axis=-1)
    cross_t = _np_cross(zeta, zeta @ Iinv.T)
    cross_s = _np_cross(zeta, zeta @ Jinv.T)
    return z_t, d_sig, d_mu, d_xi, cross_t, cross_s


numpy_kernels = SimpleNamespace(
    name="numpy", diff=_np_diff, unreduced_rates=_np_unreduced_rates, reduced_rates=_np_reduced_rates
)


# --------------------------------------------------------------------------
# numba backend


def _build_numba():
    from numba import njit

    @njit(cache=True)
    def diff(f, ds, order):
        N = f.shape[0]
        K = f.shape[1]
        w1 = 0.5
        w2 = 0.0
        if order == 4:
            w1 = 2.0 / 3.0
            w2 = -1.0 / 12.0
        out = np.empty_like(f)
        for n in range(N):
            np1 = (n + 1) % N
            nm1 = (n - 1) % N
            np2 = (n + 2) % N
            nm2 = (n - 2) % N
            for k in range(K):
                v = w1 * (f[np1, k] - f[nm1, k])
                if w2 != 0.0:
                    v += w2 * (f[np2, k] - f[nm2, k])
                out[n, k] = v / ds
        return out

    @njit(cache=True)
    def cross(a, b, out):
        out[0] = a[1] * b[2] - a[2] * b[1]
        out[1] = a[2] * b[0] - a[0] * b[2]
        out[2] = a[0] * b[1] - a[1] * b[0]

    @njit(cache=True)
    def matvec(M, v, out):
        for i in range(3):
            out[i] = M[i, 0] * v[0] + M[i, 1] * v[1] + M[i, 2] * v[2]

    @njit(cache=True)
    def matTvec(M, v, out):
        for i in range(3):
            out[i] = M[0, i] * v[0] + M[1, i] * v[1] + M[2, i] * v[2]

    @njit(cache=True)
    def unreduced_rates(R, p_t, Iinv, J, e, chi, ds, order):
        N = R.shape[0]
        dR = diff(R.reshape(N, 9), ds, order)
        w_t = np.empty((N, 3))
        p_s = np.empty((N, 3))
        torque = np.empty((N, 3))
        w_s = np.empty(3)
        tmp = np.empty(3)
        tmp2 = np.empty(3)
        for n in range(N):
            Rn = R[n]
            # M = dR R^T, w_s = vee of its antisymmetric part
            M = np.zeros((3, 3))
            for i in range(3):
                for j in range(3):
                    acc = 0.0
                    for k in range(3):
                        acc += dR[n, 3 * i + k] * Rn[j, k]
                    M[i, j] = acc
            w_s[0] = 0.5 * (M[2, 1] - M[1, 2])
            w_s[1] = 0.5 * (M[0, 2] - M[2, 0])
            w_s[2] = 0.5 * (M[1, 0] - M[0, 1])
            matTvec(Rn, w_s, tmp)
            matvec(J, tmp, tmp2)
            matvec(Rn, tmp2, tmp)
            for i in range(3):
                p_s[n, i] = -tmp[i]
            matTvec(Rn, p_t[n], tmp)
            matvec(Iinv, tmp, tmp2)
            matvec(Rn, tmp2, tmp)
            for i in range(3):
                w_t[n, i] = tmp[i]
            matvec(Rn, chi, tmp)
            torque[n, 0] = -e * tmp[1]
            torque[n, 1] = e * tmp[0]
            torque[n, 2] = 0.0
        dps = diff(p_s, ds, order)
        dp_t = np.empty((N, 3))
        for n in range(N):
            for i in range(3):
                dp_t[n, i] = -dps[n, i] + torque[n, i]
        return w_t, dp_t

    @njit(cache=True)
    def reduced_rates(zeta, sigma, mu, xi, Iinv, J, Jinv, e, chi, ds, order):
        N = zeta.shape[0]
        z_s = diff(zeta, ds, order)
        sig_s = np.empty((N, 3))
        mu_s = np.empty((N, 1))
        eta = np.empty((N, 1))
        z_t = np.empty((N, 3))
        cross_t = np.empty((N, 3))
        cross_s = np.empty((N, 3))
        Om = np.empty(3)
        P = np.empty(3)
        tmp = np.empty(3)
        for n in range(N):
            z = zeta[n]
            cross(z, z_s[n], tmp)
            for i in range(3):
                Om[i] = xi[n] * z[i] - tmp[i]
            matvec(J, Om, P)
            for i in range(3):
                P[i] = -P[i]
            cross(z, P, tmp)
            for i in range(3):
                sig_s[n, i] = tmp[i]
            mu_s[n, 0] = z[0] * P[0] + z[1] * P[1] + z[2] * P[2]
            cross(z, sigma[n], tmp)
            for i in range(3):
                P[i] = mu[n] * z[i] - tmp[i]
            matvec(Iinv, P, Om)
            cross(z, Om, tmp)
            for i in range(3):
                z_t[n, i] = tmp[i]
            eta[n, 0] = z[0] * Om[0] + z[1] * Om[1] + z[2] * Om[2]
            matvec(Iinv, z, P)
            cross(z, P, tmp)
            for i in range(3):
                cross_t[n, i] = tmp[i]
            matvec(Jinv, z, P)
            cross(z, P, tmp)
            for i in range(3):
                cross_s[n, i] = tmp[i]
        d_sig_s = diff(sig_s, ds, order)
        d_mu_s = diff(mu_s, ds, order)
        d_eta = diff(eta, ds, order)
        d_sig = np.empty((N, 3))
        d_mu = np.empty(N)
        d_xi = np.empty(N)
        a = np.empty(3)
        b = np.empty(3)
        for n in range(N):
            z = zeta[n]
            d_mu[n] = -d_mu_s[n, 0]
            normal = 0.0
            zc = 0.0
            for i in range(3):
                normal += z_t[n, i] * sigma[n, i] + z_s[n, i] * sig_s[n, i]
                zc += z[i] * chi[i]
            cross(z, sigma[n], a)
            cross(z, sig_s[n], b)
            for i in range(3):
                d_sig[n, i] = (
                    -d_sig_s[n, i]
                    - eta[n, 0] * a[i]
                    - xi[n] * b[i]
                    - normal * z[i]
                    - e * (chi[i] - z[i] * zc)
                )
            cross(z_s[n], z_t[n], a)
            d_xi[n] = d_eta[n, 0] - (z[0] * a[0] + z[1] * a[1] + z[2] * a[2])
        return z_t, d_sig, d_mu, d_xi, cross_t, cross_s

    return SimpleNamespace(
        name="numba", diff=diff, unreduced_rates=unreduced_rates, reduced_rates=reduced_rates
    )


def _numba_disabled():
    return os.environ.get(_FLAG, "0").strip().lower() not in ("", "0", "false", "no")


try:
    numba_kernels = _build_numba()
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_kernels = None


def active_kernels():
    """Kernel namespace selected by the environment flag."""
    if numba_kernels is None or _numba_disabled():
        return numpy_kernels
    return numba_kernels
