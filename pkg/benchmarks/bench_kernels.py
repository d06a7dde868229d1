#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the two hot paths — multiplicative KL-NMF sweeps and batched
union-find — on synthetic inputs of configurable size, and prints the
per-backend wall times with the resulting speedup.

    python3 benchmarks/bench_kernels.py --size 400 --rank 13 --sweeps 50
"""

import argparse
import time

import numpy as np
from scipy import sparse

from cryptoflow._kernels import get_backend


def available_backends():
    backends = {}
    for name in ("python", "compiled"):
        try:
            backends[name] = get_backend(name)
        except ImportError:
            print(f"note: {name} backend unavailable, skipping")
    return backends


def best_of(repeats, fn):
    return min(timed(fn) for _ in range(repeats))


def timed(fn):
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


def bench_nmf(backends, args, rng):
    X = np.where(
        rng.random((args.size, args.size)) < args.density,
        rng.integers(1, 50, (args.size, args.size)),
        0,
    ).astype(np.float64)
    X[0, 0] = max(X[0, 0], 1.0)
    csr = sparse.csr_matrix(X)
    indptr = csr.indptr.astype(np.int64)
    indices = csr.indices.astype(np.int64)
    data = csr.data.astype(np.float64)
    S0 = np.ascontiguousarray(rng.uniform(0.1, 1.0, (args.size, args.rank)))
    D0 = np.ascontiguousarray(rng.uniform(0.1, 1.0, (args.rank, args.size)))

    print(
        f"\nKL-NMF: {args.size}x{args.size} matrix, {csr.nnz} nonzeros, "
        f"K={args.rank}, {args.sweeps} sweeps"
    )
    results = {}
    for name, impl in backends.items():
        def run():
            S, D = S0.copy(), D0.copy()
            for _ in range(args.sweeps):
                impl.kl_step(indptr, indices, data, S, D, 1e-12)
            impl.kl_objective(indptr, indices, data, S, D, 1e-12)

        results[name] = best_of(args.repeats, run)
        per_sweep = 1000.0 * results[name] / args.sweeps
        print(f"  {name:>8}: {results[name]:8.4f} s  ({per_sweep:7.3f} ms/sweep)")
    report_speedup(results)


def bench_union_find(backends, args, rng):
    n = args.elements
    left = rng.integers(0, n, size=args.pairs).astype(np.int64)
    right = rng.integers(0, n, size=args.pairs).astype(np.int64)

    print(f"\nunion-find: {n} elements, {args.pairs} union pairs + root sweep")
    results = {}
    for name, impl in backends.items():
        def run():
            parent = np.arange(n, dtype=np.int64)
            size = np.ones(n, dtype=np.int64)
            impl.union_pairs(parent, size, left, right)
            impl.find_roots(parent)

        results[name] = best_of(args.repeats, run)
        print(f"  {name:>8}: {results[name]:8.4f} s")
    report_speedup(results)


def report_speedup(results):
    if len(results) == 2:
        print(f"  speedup: {results['python'] / results['compiled']:.1f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=400, help="matrix side length")
    parser.add_argument("--rank", type=int, default=13, help="factorization rank")
    parser.add_argument("--sweeps", type=int, default=50, help="update sweeps to time")
    parser.add_argument("--density", type=float, default=0.1)
    parser.add_argument("--elements", type=int, default=2_000_000,
                        help="union-find universe size")
    parser.add_argument("--pairs", type=int, default=3_000_000,
                        help="union operations to perform")
    parser.add_argument("--repeats", type=int, default=3, help="best-of repeats")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    rng = np.random.default_rng(args.seed)
    bench_nmf(backends, args, rng)
    bench_union_find(backends, args, rng)


if __name__ == "__main__":
    main()
