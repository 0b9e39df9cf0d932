"""Time the compiled ball-count kernels against the pure-numpy fallback.

Usage: ``python3 benchmarks/bench_kernels.py [--sizes 100 300 1000] [--repeat 3]``
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from geosens import kernels
from geosens._accel import HAVE_NUMBA


def _points(geometry, rng, n, dim):
    if geometry == "sphere":
        x = rng.normal(size=(n, dim))
        return x / np.linalg.norm(x, axis=1, keepdims=True)
    return rng.normal(size=(n, dim))


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 300, 1000])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path can run")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<10}{'N':>6}{'numpy s':>12}{'numba s':>12}{'speedup':>10}  equal")
    cases = [("flat", 1), ("flat", 3), ("sphere", 3)]
    for geometry, dim in cases:
        label = f"{geometry}:{dim}"
        for n in args.sizes:
            z, zv, w = (_points(geometry, rng, n, dim) for _ in range(3))
            run_np = lambda: kernels.ball_counts(geometry, z, zv, w, 1e-10, use_numba=False)  # noqa: E731
            t_np, c_np = best_of(run_np, args.repeat)
            if HAVE_NUMBA:
                run_nb = lambda: kernels.ball_counts(geometry, z, zv, w, 1e-10, use_numba=True)  # noqa: E731
                run_nb()  # compile outside the timing
                t_nb, c_nb = best_of(run_nb, args.repeat)
                print(f"{label:<10}{n:>6}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}  {c_np == c_nb}")
            else:
                print(f"{label:<10}{n:>6}{t_np:>12.4f}{'-':>12}{'-':>10}  -")


if __name__ == "__main__":
    main()
