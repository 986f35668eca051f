"""Time the numba and numpy right-hand-side kernels against each other.

Usage: python3 benchmarks/bench_kernels.py [--sizes 64 256 1024] [--repeat 50]
"""

import argparse
import time

import numpy as np

from polystrand.dynamics import Grid, initial_conditions
from polystrand.kernels import numba_kernels, numpy_kernels
from polystrand.strand import StrandParams


def _best(fn, repeat):
    fn()  # warm-up (triggers numba compilation)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(n_s, repeat, order=2):
    params = StrandParams(np.diag([1.0, 2.0, 3.0]), np.diag([2.0, 1.0, 1.0]), 1.0, [0.3, -0.2, 1.0])
    grid = Grid(n_s)
    u, r = initial_conditions("fourier", grid, seed=1, params=params)
    Iinv, J, Jinv = params.I.inverse, params.J.matrix, params.J.inverse
    rows = []
    for kern in (numpy_kernels, numba_kernels):
        if kern is None:
            continue
        t_u = _best(lambda: kern.unreduced_rates(u.R, u.p_t, Iinv, J, params.e, params.chi, grid.ds, order), repeat)
        t_r = _best(
            lambda: kern.reduced_rates(
                r.zeta, r.sigma_t, r.mu_t, r.xi, Iinv, J, Jinv, params.e, params.chi, grid.ds, order
            ),
            repeat,
        )
        rows.append((kern.name, t_u, t_r))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 256, 1024, 4096])
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    print(f"{'n_s':>6} {'backend':>8} {'unreduced [us]':>15} {'reduced [us]':>13}")
    for n in args.sizes:
        rows = bench(n, args.repeat)
        for name, t_u, t_r in rows:
            print(f"{n:>6} {name:>8} {t_u * 1e6:>15.1f} {t_r * 1e6:>13.1f}")
        if len(rows) == 2:
            print(f"{'':>6} {'speedup':>8} {rows[0][1] / rows[1][1]:>15.2f} {rows[0][2] / rows[1][2]:>13.2f}")


if __name__ == "__main__":
    main()
