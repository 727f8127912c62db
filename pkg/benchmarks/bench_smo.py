"""Time the compiled SMO core against the pure-Python fallback.

Usage: python benchmarks/bench_smo.py [--n 455] [--repeats 3]

Both backends solve the same dual problems (WDBC training split, z-scored)
and must return bit-identical multipliers.
"""
import argparse
import os
import time

import numpy as np

from diagkit import _smo_py
from diagkit.dataset import SplitSpec, fit_standardizer, load_wdbc, split
from diagkit.kernels import KernelSpec, gram

try:
    from diagkit import _smo
except ImportError:
    _smo = None

DATA = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data", "wdbc.data")

CASES = [
    (KernelSpec.rbf(0.033), 10.0),
    (KernelSpec.rbf(0.01), 100.0),
    (KernelSpec.poly(2), 1e-3),
    (KernelSpec.tanh(0.001, -0.1), 100.0),
]


def best_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=455, help="training rows used")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    train, _ = split(load_wdbc(DATA), SplitSpec(0.8, 0))
    X = fit_standardizer(train).apply(train.features)[: args.n]
    y = train.y_pm[: args.n]
    print(f"n = {y.size}, best of {args.repeats}")
    print(f"{'kernel':<28} {'C':>8} {'iters':>7} {'python s':>10} {'cython s':>10} {'speedup':>8}  identical")
    for kernel, C in CASES:
        K = gram(kernel, X)
        t_py, (a_py, _, it, _) = best_time(lambda: _smo_py.smo_solve(K, y, C, 1e-3, 10 * y.size ** 2), args.repeats)
        if _smo is None:
            print(f"{str(kernel):<28} {C:>8g} {it:>7d} {t_py:>10.4f} {'n/a':>10} {'n/a':>8}  n/a")
            continue
        t_cy, (a_cy, _, _, _) = best_time(lambda: _smo.smo_solve(K, y, C, 1e-3, 10 * y.size ** 2), args.repeats)
        same = np.array_equal(a_py, a_cy)
        print(f"{str(kernel):<28} {C:>8g} {it:>7d} {t_py:>10.4f} {t_cy:>10.4f} {t_py / t_cy:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
