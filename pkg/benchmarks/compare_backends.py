"""Time the hot kernels on both backends.

Run:  python benchmarks/compare_backends.py [--rows 4096] [--cols 512]

The numba variants are compiled (and cached) before timing; the table shows
per-call wall time and the speedup of numba over the numpy reference. The
same kernels can be forced package-wide with ZSAR_BACKEND=numpy|numba.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from zsar import kernels
from zsar.baselines import ale_weights


def bench(fn, args, repeats=20):
    fn(*args)  # warm (and JIT-compile)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=4096)
    parser.add_argument("--cols", type=int, default=512)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if kernels.xent_rows_numba is None:
        raise SystemExit("numba backend unavailable; install zsar[accel]")

    rng = np.random.default_rng(0)
    n, c = args.rows, args.cols

    p = rng.standard_normal((n, c))
    q = np.zeros((n, c))
    q[np.arange(n), rng.integers(0, c, size=n)] = 1.0

    flat = rng.standard_normal(n * 16)
    grad = rng.standard_normal(n * 16)
    m = np.zeros_like(flat)
    v = np.zeros_like(flat)

    scores = rng.standard_normal((n, c))
    labels = rng.integers(0, c, size=n).astype(np.int64)
    lp = ale_weights(c)

    cases = [
        ("xent_rows",
         kernels.xent_rows_numpy, kernels.xent_rows_numba,
         (p, q, 10.0)),
        ("adam_step",
         kernels.adam_step_numpy, kernels.adam_step_numba,
         (flat, grad, m, v, 3, 1e-3, 0.9, 0.999, 1e-8, 1e-4)),
        ("ranking_loss_rows (ale)",
         kernels.ranking_loss_rows_numpy, kernels.ranking_loss_rows_numba,
         (scores, labels, 0.2, 1, lp)),
    ]

    print(f"rows={n} cols={c} repeats={args.repeats}")
    print(f"{'kernel':<26} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    for name, f_np, f_nb, case_args in cases:
        t_np = bench(f_np, case_args, args.repeats)
        t_nb = bench(f_nb, case_args, args.repeats)
        print(f"{name:<26} {t_np * 1e3:>12.2f} {t_nb * 1e3:>12.2f} "
              f"{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
