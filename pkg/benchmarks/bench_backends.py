"""Timing comparison of the compiled and pure-numpy integration kernels.

Runs each hot kernel with both implementations on OPO-sized problems and
prints a table of best-of-repeat wall times.  Usage:

    python benchmarks/bench_backends.py [--steps 10000] [--batch 100] [--repeat 5]
"""

import argparse
import time

import numpy as np

from lgqsmooth import _core
from lgqsmooth._core import _kernels_py
from lgqsmooth.model import OPOParams, build_opo
from lgqsmooth.trajectory import TimeGrid, true_cov_half_grid


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=10000)
    ap.add_argument("--batch", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    try:
        from lgqsmooth._core import _kernels_cy
    except ImportError:
        print("compiled extension not available; nothing to compare")
        return

    system = build_opo(OPOParams())
    grid = TimeGrid(0.0, args.steps * 1e-3, 1e-3)
    n, dt = grid.n_steps, grid.dt
    M = system.dim
    V0 = system.vacuum()

    vt_half = true_cov_half_grid(system, V0, grid)
    abar = system.A - system.Gamma_o.T @ system.C_o - vt_half @ (system.C_o.T @ system.C_o)
    abar_t = np.ascontiguousarray(np.swapaxes(abar, -1, -2))
    d_half = np.broadcast_to(system.C_o.T @ system.C_o, (2 * n + 1, M, M))
    ku = vt_half @ system.C_u.T + system.Gamma_u.T
    c_half = np.ascontiguousarray(np.swapaxes(ku, -1, -2))
    gt_half = np.zeros((2 * n + 1, M, ku.shape[-1]))

    rng = np.random.default_rng(0)
    P_aff = np.broadcast_to(np.eye(M) + system.A * dt, (n, M, M))
    Q_aff = rng.standard_normal((n, M, 1))
    u = rng.standard_normal((n, args.batch, 1)) * np.sqrt(dt)
    x0 = np.zeros((args.batch, M))

    cases = [
        ("rk4_cov_grid (%d steps)" % n,
         lambda impl: _core.rk4_cov_grid(system.A, system.D, system.C_o,
                                         system.Gamma_o.T, V0, dt, n, impl=impl)),
        ("rk4_cov_grid_tpath (%d steps)" % n,
         lambda impl: _core.rk4_cov_grid_tpath(abar_t, d_half, c_half, gt_half,
                                               np.zeros((M, M)), dt, n, True,
                                               impl=impl)),
        ("affine_forward (%d x %d)" % (n, args.batch),
         lambda impl: _core.affine_forward(P_aff, Q_aff, u, x0, impl=impl)),
        ("rk4_cov_converge (tol 1e-10)",
         lambda impl: _core.rk4_cov_converge(system.A, system.D, system.C_o,
                                             system.Gamma_o.T, V0, 0.01,
                                             2_000_000, 1e-10, 100, impl=impl)),
    ]

    print(f"{'kernel':38s} {'python':>10s} {'cython':>10s} {'speedup':>8s}")
    for name, call in cases:
        t_py = _best(lambda: call(_kernels_py), args.repeat)
        t_cy = _best(lambda: call(_kernels_cy), args.repeat)
        print(f"{name:38s} {t_py * 1e3:9.2f}ms {t_cy * 1e3:9.2f}ms {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
