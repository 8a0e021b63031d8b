#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

The two paths are written to accumulate in identical order, so besides
timing them this script asserts bit-exact agreement on every workload.

    python3 benchmarks/bench_kernels.py [--size 512] [--repeats 5]

To run the whole package on the fallback path instead, set
NOISEPROBE_NUMBA=0 in the environment.
"""

import argparse
import time

import numpy as np

from noiseprobe import _kernels
from noiseprobe.oracle import _box_taps


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(name, njit_fn, numpy_fn, args, repeats, equal=np.array_equal):
    # warm-up compiles the njit path outside the timed region
    njit_fn(*args)
    t_njit, out_njit = timeit(lambda: njit_fn(*args), repeats)
    t_numpy, out_numpy = timeit(lambda: numpy_fn(*args), repeats)
    if isinstance(out_njit, tuple):
        agree = all(equal(a, b) for a, b in zip(out_njit, out_numpy))
    else:
        agree = equal(out_njit, out_numpy)
    status = "bit-identical" if agree else "MISMATCH"
    print(
        f"{name:<22} numba {t_njit * 1e3:8.2f} ms   numpy {t_numpy * 1e3:8.2f} ms   "
        f"speedup {t_numpy / t_njit:6.1f}x   [{status}]"
    )
    if not agree:
        raise SystemExit(f"{name}: paths disagree")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not _kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")

    n = args.size
    rng = np.random.default_rng(0)
    print(f"image size {n}x{n}x3, best of {args.repeats}\n")

    vals = rng.integers(0, 256, size=(n, n, 3)).astype(np.float64)
    flags = rng.random((n, n, 3)) < 0.2
    bench(
        "restore_pass p=0.2",
        _kernels._restore_pass_njit,
        _kernels._restore_pass_numpy,
        (vals, flags, 1, 3),
        args.repeats,
    )

    lines = rng.random((n * 3, n))
    t = np.arange(-3, 4, dtype=np.float64)
    kernel = np.exp(-t * t / 2.0)
    kernel /= kernel.sum()
    bench(
        "conv_lines r=3",
        _kernels._conv_lines_njit,
        _kernels._conv_lines_numpy,
        (lines, kernel),
        args.repeats,
    )

    src = rng.random((n, n, 3))
    starts, counts, weights, cell = _box_taps(n)
    bench(
        "box_axis0 -> 16",
        _kernels._box_axis0_njit,
        _kernels._box_axis0_numpy,
        (src, starts, counts, weights, cell),
        args.repeats,
    )


if __name__ == "__main__":
    main()
