import importlib

import numpy as np
import pytest

from polystrand import kernels
from polystrand.dynamics import Grid, initial_conditions

pytestmark = pytest.mark.skipif(kernels.numba_kernels is None, reason="numba not installed")


@pytest.fixture
def state(params):
    grid = Grid(48)
    u, r = initial_conditions("fourier", grid, seed=3, params=params)
    return grid, u, r


@pytest.mark.parametrize("order", [2, 4])
def test_diff_backends_agree(rng, order):
    f = rng.normal(size=(40, 5))
    np.testing.assert_allclose(
        kernels.numba_kernels.diff(f, 0.1, order), kernels.numpy_kernels.diff(f, 0.1, order), atol=1e-12
    )


@pytest.mark.parametrize("order", [2, 4])
def test_diff_convergence_order(order):
    errs = []
    for n in (32, 64):
        s = np.arange(n) / n
        d = kernels.numpy_kernels.diff(np.sin(2 * np.pi * s)[:, None], 1.0 / n, order)[:, 0]
        errs.append(np.max(np.abs(d - 2 * np.pi * np.cos(2 * np.pi * s))))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(order, abs=0.1)


@pytest.mark.parametrize("order", [2, 4])
def test_unreduced_backends_agree(params, state, order):
    grid, u, _ = state
    args = (u.R, u.p_t, params.I.inverse, params.J.matrix, params.e, params.chi, grid.ds, order)
    for a, b in zip(kernels.numba_kernels.unreduced_rates(*args), kernels.numpy_kernels.unreduced_rates(*args)):
        np.testing.assert_allclose(a, b, atol=1e-11)


@pytest.mark.parametrize("order", [2, 4])
def test_reduced_backends_agree(params, state, order):
    grid, _, r = state
    args = (
        r.zeta, r.sigma_t, r.mu_t, r.xi, params.I.inverse, params.J.matrix, params.J.inverse,
        params.e, params.chi, grid.ds, order,
    )
    for a, b in zip(kernels.numba_kernels.reduced_rates(*args), kernels.numpy_kernels.reduced_rates(*args)):
        np.testing.assert_allclose(a, b, atol=1e-11)


@pytest.mark.parametrize("value, expected", [("1", "numpy"), ("true", "numpy"), ("0", "numba"), ("", "numba")])
def test_env_flag_selects_backend(monkeypatch, value, expected):
    monkeypatch.setenv("POLYSTRAND_DISABLE_NUMBA", value)
    assert kernels.active_kernels().name == expected


def test_env_flag_unset_uses_numba(monkeypatch):
    monkeypatch.delenv("POLYSTRAND_DISABLE_NUMBA", raising=False)
    assert importlib.reload(kernels).active_kernels().name == "numba"
