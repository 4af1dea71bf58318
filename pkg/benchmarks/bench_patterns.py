"""Benchmark the compiled pattern kernel against the pure-Python fallback.

Usage: python benchmarks/bench_patterns.py [--sizes 60,120,240]

Times one cover_step call per kernel on two input families: unstructured
random point clouds and motif grids (a small pattern repeated by
translation), checking on every run that both kernels return identical
results.
"""

from __future__ import annotations

import argparse
import random
import time

from midialign import _siatec_py

try:
    from midialign import _siatec_c
except ImportError:
    _siatec_c = None


def random_cloud(rng, n):
    points = set()
    while len(points) < n:
        points.add((rng.randrange(0, n * 4), rng.randrange(36, 96)))
    return sorted(points)


def motif_grid(rng, n):
    motif = sorted({(rng.randrange(0, 8), rng.randrange(0, 12)) for _ in range(6)})
    points = set()
    i = 0
    while len(points) < n:
        points.update((x + 17 * i, y + 50) for x, y in motif)
        i += 1
    return sorted(points)


def time_kernel(kernel, points, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = kernel.cover_step(points)
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="60,120,240,400",
                        help="comma-separated point counts")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if _siatec_c is None:
        print("compiled kernel not built; timing the pure-Python kernel only")

    print(f"{'family':<8} {'n':>5} {'pure (ms)':>12} {'compiled (ms)':>14} {'speedup':>8}")
    for family, make in (("random", random_cloud), ("motifs", motif_grid)):
        for n in sizes:
            rng = random.Random(args.seed)
            points = make(rng, n)
            t_py, r_py = time_kernel(_siatec_py, points)
            if _siatec_c is None:
                print(f"{family:<8} {len(points):>5} {t_py * 1e3:>12.1f} {'-':>14} {'-':>8}")
                continue
            t_c, r_c = time_kernel(_siatec_c, points)
            assert r_py == r_c, "kernel outputs diverged"
            print(f"{family:<8} {len(points):>5} {t_py * 1e3:>12.1f} "
                  f"{t_c * 1e3:>14.1f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
