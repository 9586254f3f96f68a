#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-NumPy fallbacks.

Runs each hot kernel on a representative workload in both variants,
checks that the outputs agree, and prints a timing table.  Run with
FMPP_NO_NUMBA=1 to confirm the fallback is the active selection.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from fmpp import _kernels as K
from fmpp._jit import USING_NUMBA


def timeit(fn, args, repeat):
    fn(*args)  # warm-up (jit compilation)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_pair_stats(rng, repeat):
    pts = rng.random((600, 2))
    w = np.ones(600)
    lags = np.linspace(0.02, 0.25, 24)
    sides = np.array([1.0, 1.0])
    args = (pts, w, w, lags, 0.02, sides, False)
    t_jit, a = timeit(K.pair_stats_jit, args, repeat)
    t_np, b = timeit(K.pair_stats_numpy, args, repeat)
    assert np.allclose(a[0], b[0], rtol=1e-9)
    return "pair_stats (600 pts, 24 lags)", t_jit, t_np


def bench_gibbs_chain(rng, repeat):
    steps = 40000
    lo = np.array([0.0, 0.0])
    hi = np.array([1.0, 1.0])
    args = (np.empty((0, 2)), lo, hi, False, 80.0, 0.5,
            rng.random(steps), rng.random((steps, 2)), rng.random(steps),
            rng.random(steps), 0.05, -1.0, 2)
    t_jit, a = timeit(K.gibbs_chain_jit, args, repeat)
    t_np, b = timeit(K.gibbs_chain_numpy, args, repeat)
    assert np.allclose(np.sort(a, axis=0), np.sort(b, axis=0))
    return f"gibbs_chain ({steps} proposals)", t_jit, t_np


def bench_gi_integrate(rng, repeat):
    n, nsteps = 40, 2000
    xs = rng.random((n, 2))
    births = rng.random(n) * 0.2
    deaths = births + 5.0
    normals = np.zeros((1, n))
    args = (xs, births, deaths, 0.0, 1.0 / nsteps, nsteps, 0,
            np.array([1.5, 0.8]), 1, np.array([0.3, 0.2]), 0,
            np.zeros(1), normals, 0, -1.0)
    t_jit, (a, _, _) = timeit(K.gi_integrate_values_jit, args, repeat)
    t_np, (b, _, _) = timeit(K.gi_integrate_values_numpy, args, repeat)
    assert np.allclose(a, b, atol=1e-9)
    return f"gi_integrate ({n} pts x {nsteps} steps)", t_jit, t_np


def bench_coverage(rng, repeat):
    centers = rng.random((60, 2))
    radii = 0.02 + 0.05 * rng.random(60)
    args = (centers, radii, np.array([0.0, 0.0]), np.array([1.0, 1.0]),
            512, False)
    t_jit, a = timeit(K.coverage_count_jit, args, repeat)
    t_np, b = timeit(K.coverage_count_numpy, args, repeat)
    assert a == b
    return "coverage_count (512^2 px, 60 disks)", t_jit, t_np


def bench_neighbour_counts(rng, repeat):
    queries = rng.random((4096, 2))
    pts = rng.random((200, 2))
    args = (queries, pts, np.array([1.0, 1.0]), False, 0.05, -1.0, 2)
    t_jit, a = timeit(K.neighbour_counts_jit, args, repeat)
    t_np, b = timeit(K.neighbour_counts_numpy, args, repeat)
    assert np.array_equal(a, b)
    return "neighbour_counts (4096 x 200)", t_jit, t_np


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    label = "numba" if USING_NUMBA else "python loops (numba disabled)"
    print(f"jit variant: {label}")
    print(f"{'kernel':42s} {'jit':>10s} {'numpy':>10s} {'speedup':>9s}")
    for bench in (bench_pair_stats, bench_gibbs_chain, bench_gi_integrate,
                  bench_coverage, bench_neighbour_counts):
        name, t_jit, t_np = bench(rng, args.repeat)
        print(f"{name:42s} {t_jit * 1e3:9.2f}ms {t_np * 1e3:9.2f}ms "
              f"{t_np / t_jit:8.1f}x")


if __name__ == "__main__":
    main()
