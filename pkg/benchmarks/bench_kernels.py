"""Benchmark the compiled query kernels against the pure-numpy fallback.

Both backends answer exact k-NN and radius queries with bit-identical
results; this script measures the speed difference on random clouds.

Usage: python benchmarks/bench_kernels.py [--sizes 1000 10000 50000] [--queries 2000]
"""

import argparse
import time

import numpy as np

from cloudpost.spatial import HAVE_COMPILED_KERNELS, KdTree, _py_kernels


def timed(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench(n, n_queries, k, radius, rng):
    pts = rng.random((n, 3))
    queries = rng.random((n_queries, 3))

    backends = [("pure", _py_kernels)]
    if HAVE_COMPILED_KERNELS:
        from cloudpost.spatial import _kernels

        backends.append(("compiled", _kernels))

    rows = []
    results = {}
    for name, backend in backends:
        tree = KdTree(pts, backend=backend)
        t_knn, r_knn = timed(lambda: tree.knn_batch(queries, k))
        t_rad, r_rad = timed(lambda: tree.radius_batch(queries, radius))
        rows.append((name, t_knn, t_rad))
        results[name] = (r_knn, r_rad)

    if len(results) == 2:
        (ik, dk, ck), (ir, dr, orr) = results["pure"]
        (jk, ek, fk), (jr, er, jrr) = results["compiled"]
        assert np.array_equal(ik, jk) and np.array_equal(dk, ek)
        assert np.array_equal(ir, jr) and np.array_equal(dr, er)

    print(f"\nn = {n}, queries = {n_queries}, k = {k}, radius = {radius}")
    print(f"{'backend':>10} {'knn_batch':>12} {'radius_batch':>14}")
    for name, t_knn, t_rad in rows:
        print(f"{name:>10} {t_knn * 1e3:>10.1f} ms {t_rad * 1e3:>12.1f} ms")
    if len(rows) == 2:
        print(
            f"{'speedup':>10} {rows[0][1] / rows[1][1]:>10.1f} x "
            f"{rows[0][2] / rows[1][2]:>11.1f} x"
        )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[1000, 10000, 50000])
    parser.add_argument("--queries", type=int, default=2000)
    parser.add_argument("--k", type=int, default=16)
    parser.add_argument("--radius", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not HAVE_COMPILED_KERNELS:
        print("compiled extension not available; benchmarking fallback only")
    rng = np.random.default_rng(args.seed)
    for n in args.sizes:
        bench(n, args.queries, args.k, args.radius, rng)


if __name__ == "__main__":
    main()
