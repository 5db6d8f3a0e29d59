#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs each hot kernel (vote accumulation, confusion counting, AdamW update)
at a few sizes on both paths and prints median times plus speedup. The
numba path needs the optional numba dependency; without it only the numpy
column is reported.

Usage: python benchmarks/bench_kernels.py [--iterations N]
"""

import argparse
import time

import numpy as np

from stancekit import kernels


def median_time(func, *args, iterations=20, warmup=2):
    for _ in range(warmup):
        func(*args)
    times = []
    for _ in range(iterations):
        start = time.perf_counter()
        func(*args)
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def bench_confusion(iterations):
    print("confusion_counts (examples, labels)")
    rng = np.random.default_rng(0)
    for n, labels in [(10_000, 3), (100_000, 3), (1_000_000, 5)]:
        gold = rng.integers(0, labels, n).astype(np.int64)
        pred = rng.integers(0, labels, n).astype(np.int64)
        t_np = median_time(kernels.confusion_counts_numpy, gold, pred, labels,
                           iterations=iterations)
        row = f"  n={n:>9,} L={labels}: numpy {t_np * 1e3:8.3f} ms"
        if kernels.HAS_NUMBA:
            t_nb = median_time(kernels.confusion_counts_numba, gold, pred, labels,
                               iterations=iterations)
            row += f"  numba {t_nb * 1e3:8.3f} ms  speedup {t_np / t_nb:5.2f}x"
        print(row)


def bench_vote(iterations):
    print("vote_batch (members, examples, labels)")
    rng = np.random.default_rng(1)
    for members, n, labels in [(3, 10_000, 3), (3, 100_000, 3), (6, 200_000, 3)]:
        scores = rng.random((members, n, labels))
        scores /= scores.sum(axis=2, keepdims=True)
        hard = scores.argmax(axis=2).astype(np.int64)
        weights = rng.random(members) + 0.5
        args = (scores, weights, hard, weights, kernels.TIE_HIGHEST_WEIGHT, 0, 1e-9)
        t_np = median_time(kernels.vote_batch_numpy, *args, iterations=iterations)
        row = f"  M={members} n={n:>9,} L={labels}: numpy {t_np * 1e3:8.3f} ms"
        if kernels.HAS_NUMBA:
            t_nb = median_time(kernels.vote_batch_numba, *args, iterations=iterations)
            row += f"  numba {t_nb * 1e3:8.3f} ms  speedup {t_np / t_nb:5.2f}x"
        print(row)


def bench_adamw(iterations):
    print("adamw_update (parameters)")
    rng = np.random.default_rng(2)
    for size in [100_000, 1_000_000, 10_000_000]:
        param = rng.standard_normal(size)
        grad = rng.standard_normal(size)
        m = np.zeros(size)
        v = np.zeros(size)
        args = (param, grad, m, v, 0.1, 0.001, 1e-5, 0.9, 0.999, 1e-8, 0.01)
        t_np = median_time(kernels.adamw_update_numpy, *args, iterations=iterations)
        row = f"  p={size:>11,}: numpy {t_np * 1e3:8.3f} ms"
        if kernels.HAS_NUMBA:
            t_nb = median_time(kernels.adamw_update_numba, *args, iterations=iterations)
            row += f"  numba {t_nb * 1e3:8.3f} ms  speedup {t_np / t_nb:5.2f}x"
        print(row)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iterations", type=int, default=20)
    args = parser.parse_args()
    print(f"active backend: {kernels.backend_name()} "
          f"(numba available: {kernels.HAS_NUMBA})")
    bench_confusion(args.iterations)
    bench_vote(args.iterations)
    bench_adamw(args.iterations)


if __name__ == "__main__":
    main()
