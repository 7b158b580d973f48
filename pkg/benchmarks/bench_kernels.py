#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy reference backend.

Usage: python3 benchmarks/bench_kernels.py [--points N]
"""

import argparse
import time

import numpy as np

from stillmap.kernels import _reference

try:
    from stillmap.kernels import _compiled
except ImportError:
    _compiled = None


def best_of(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--points", type=int, default=2_000_000)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n = args.points
    xyz = np.ascontiguousarray(rng.uniform(-60, 60, size=(n, 3)))
    intensity = np.ascontiguousarray(rng.uniform(size=n))

    center = np.array([5.0, -3.0, 0.0])
    half = np.array([1.1, 2.6, 1.0])
    nb = 8
    centers = np.ascontiguousarray(rng.uniform(-40, 40, size=(nb, 3)))
    yaws = np.ascontiguousarray(rng.uniform(-np.pi, np.pi, size=nb))
    halves = np.ascontiguousarray(rng.uniform(0.5, 3.0, size=(nb, 3)))

    lo = np.array([-50.0, -50.0, -10.0])
    hi = np.array([50.0, 50.0, 10.0])
    size = np.array([0.4, 0.4, 0.4])
    dims = np.ceil((hi - lo) / size).astype(np.int64)

    cases = [
        ("obb_mask", (xyz, center, 0.6, half, 0.1)),
        ("any_obb_mask", (xyz, centers, yaws, halves, 0.1)),
        ("voxel_centroids", (xyz, intensity, lo, hi, size, dims)),
        ("scan_context_matrix", (xyz, 20, 60, 80.0)),
    ]

    print(f"{n:,} points, best of 5 runs")
    print(f"{'kernel':<22}{'numpy (ms)':>12}{'compiled (ms)':>15}{'speedup':>9}")
    for name, call_args in cases:
        ref_t = best_of(getattr(_reference, name), *call_args) * 1e3
        if _compiled is None:
            print(f"{name:<22}{ref_t:>12.1f}{'n/a':>15}{'':>9}")
            continue
        com_t = best_of(getattr(_compiled, name), *call_args) * 1e3
        print(f"{name:<22}{ref_t:>12.1f}{com_t:>15.1f}{ref_t / com_t:>8.1f}x")

    if _compiled is None:
        print("\ncompiled backend not built; install with the C extension to compare")


if __name__ == "__main__":
    main()
