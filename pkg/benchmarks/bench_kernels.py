"""Timing comparison of the compiled and pure-numpy kernel backends.

Run as a script::

    python3 benchmarks/bench_kernels.py [--repeats 5]

Reports wall-clock times for one endogenous-grid policy sweep and one
toy-model policy sweep under both backends (the compiled backend is
skipped when unavailable).
"""

import argparse
import time

import numpy as np

from prefbounds import kernels
from prefbounds.backend import HAVE_NUMBA
from prefbounds.ks import GridSpec, KSParams, joint_transition


def _egm_inputs():
    params = KSParams()
    grids = GridSpec()
    k_grid = grids.k_nodes()
    K_grid = grids.K_nodes(38.0)
    Pi = joint_transition(params)
    c_pol = np.tile(1.0 + 0.05 * k_grid, (2, grids.nK, 2, 1))
    b0 = np.array([0.1, 0.1])
    b1 = np.array([0.96, 0.96])
    return (c_pol, k_grid, K_grid, b0, b1, Pi, params.z_levels,
            params.u_rates, params.alpha, params.beta, params.delta,
            params.omega, params.nu, params.lbar)


def _toy_inputs():
    x = np.linspace(0.0, 40.0, 1200)
    c = np.minimum(0.5 * (x + 1.0), x + 1e-12)
    y_vals = np.array([0.99, 1.01])
    y_probs = np.array([0.5, 0.5])
    return c, x, y_vals, y_probs, 0.05, 0.9721


def bench(fn, args, repeats):
    fn(*args)  # warm-up (includes JIT compilation when applicable)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rows = []
    egm_args = _egm_inputs()
    toy_args = _toy_inputs()
    rows.append(("egm_sweep", "numpy",
                 bench(kernels.egm_sweep_numpy, egm_args, args.repeats)))
    rows.append(("toy_policy_sweep", "numpy",
                 bench(kernels.toy_policy_sweep_numpy, toy_args,
                       args.repeats)))
    if HAVE_NUMBA and kernels.egm_sweep_numba is not None:
        rows.append(("egm_sweep", "numba",
                     bench(kernels.egm_sweep_numba, egm_args, args.repeats)))
        rows.append(("toy_policy_sweep", "numba",
                     bench(kernels.toy_policy_sweep_numba, toy_args,
                           args.repeats)))
    else:
        print("compiled backend unavailable; timing numpy only")

    print(f"{'kernel':<20} {'backend':<8} {'best of ' + str(args.repeats):>12}")
    for name, backend, t in rows:
        print(f"{name:<20} {backend:<8} {t * 1e3:>10.2f}ms")
    by_kernel = {}
    for name, backend, t in rows:
        by_kernel.setdefault(name, {})[backend] = t
    for name, d in by_kernel.items():
        if {"numba", "numpy"} <= d.keys():
            print(f"{name}: numba speedup x{d['numpy'] / d['numba']:.1f}")


if __name__ == "__main__":
    main()
