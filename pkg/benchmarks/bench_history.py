"""Compare the numba and numpy history kernels.

The history sum ``sum_l lag[n-l] U[l]`` is the only part of a time step
whose cost grows with the step index, so it dominates long runs.  Part one
times the kernels directly over a full march ``n = 1..M``; part two runs a
whole solve once per backend (selected with FRACLDG_DISABLE_NUMBA in a
subprocess).

    python benchmarks/bench_history.py [--quick]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from fracldg._accel import HAVE_NUMBA
from fracldg.frac_time import _history_numba, _history_numpy, build_dist_order_scheme

SOLVE_SNIPPET = """
import time
from fracldg._accel import backend
from fracldg.harness import make_spec, run_point
spec = make_spec(dict(case="ex1", beta=1.4, N=2, sweep="K", values=[{K}], dt="T/{M}"))
run_point(spec, {K})  # warm-up (numba compilation, operator caches)
t0 = time.perf_counter()
row = run_point(spec, {K})
print(backend(), time.perf_counter() - t0, repr(row["l2_error"]))
"""


def march(kernel, U, lag, start):
    M = U.shape[0] - 1
    acc = 0.0
    for n in range(1, M + 1):
        acc += kernel(U, n, lag, start)[0]
    return acc


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_table(sizes, repeat):
    print(f"{'M':>6} {'ndof':>6} {'numpy [s]':>11} {'numba [s]':>11} {'speedup':>8} {'max rel diff':>13}")
    rng = np.random.default_rng(0)
    for M, ndof in sizes:
        scheme = build_dist_order_scheme("gamma3", 50, 0.5 / M, M)
        U = rng.standard_normal((M + 1, ndof))
        lag, start = scheme.lag_coeffs, scheme.start_coeffs
        t_np = best_of(lambda: march(_history_numpy, U, lag, start), repeat)
        if HAVE_NUMBA:
            _history_numba(U, 2, lag, start)  # compile outside the timing
            t_nb = best_of(lambda: march(_history_numba, U, lag, start), repeat)
            diff = max(
                np.max(np.abs(_history_numba(U, n, lag, start) - _history_numpy(U, n, lag, start))
                       / (np.abs(_history_numpy(U, n, lag, start)) + 1e-300))
                for n in (1, M // 2, M)
            )
            print(f"{M:6d} {ndof:6d} {t_np:11.4f} {t_nb:11.4f} {t_np / t_nb:8.2f} {diff:13.2e}")
        else:
            print(f"{M:6d} {ndof:6d} {t_np:11.4f} {'n/a':>11} {'n/a':>8} {'n/a':>13}")


def solve_table(K, M):
    print(f"\nfull ex1 solve, N=2, K={K}, M={M}")
    for disable in ("1", "0"):
        env = dict(os.environ, FRACLDG_DISABLE_NUMBA=disable)
        res = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(K=K, M=M)],
                             env=env, capture_output=True, text=True, check=True)
        name, secs, err = res.stdout.split()
        print(f"  {name:6s} {float(secs):8.3f} s   L2 error {float(err):.6e}")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--quick", action="store_true", help="small sizes only")
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    if args.quick:
        sizes, solve = [(200, 30), (500, 60)], (10, 200)
    else:
        sizes, solve = [(200, 30), (500, 60), (1000, 60), (2000, 120), (2000, 480)], (40, 2000)
    kernel_table(sizes, args.repeat)
    solve_table(*solve)


if __name__ == "__main__":
    main()
