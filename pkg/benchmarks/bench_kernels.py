"""Benchmark the numba kernels against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--pairs 20000] [--points 200000] [--repeat 5]

Times each hot kernel on a synthetic workload sized like a real blocking
run and prints a table with the speedup. The numba column includes a warmup
call so JIT compilation is not measured.
"""

import argparse
import random
import time

import numpy as np

from placelink.kernels import numpy_impl

try:
    from placelink.kernels import numba_impl
except ImportError:
    numba_impl = None


def pack(strings):
    flat, off = [], [0]
    for s in strings:
        flat.extend(ord(c) for c in s)
        off.append(len(flat))
    return np.asarray(flat, dtype=np.int32), np.asarray(off, dtype=np.int64)


def time_call(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def build_workloads(n_pairs, n_points, seed=0):
    rng = np.random.default_rng(seed)
    pyrng = random.Random(seed)
    words = ["warung", "kopi", "mie", "bakso", "hana", "putri", "bintaro", "tlogomas", "jaya"]
    names_a = [" ".join(pyrng.choices(words, k=pyrng.randint(2, 4))) for _ in range(n_pairs)]
    names_b = [" ".join(pyrng.choices(words, k=pyrng.randint(2, 4))) for _ in range(n_pairs)]
    af, ao = pack(names_a)
    bf, bo = pack(names_b)

    lat1 = rng.uniform(-10, 10, n_points)
    lon1 = rng.uniform(95, 125, n_points)
    lat2 = lat1 + rng.normal(0, 0.01, n_points)
    lon2 = lon1 + rng.normal(0, 0.01, n_points)

    n_rows = 2000
    x = rng.uniform(0, 1, (n_rows, 4))
    y = (x[:, 1] + 0.2 * rng.normal(size=n_rows) > 0.5).astype(np.float64)
    w = np.ones(n_rows)
    g = rng.normal(size=n_rows)
    feats = np.arange(4, dtype=np.int64)

    return {
        "levenshtein_batch": ((af, ao, bf, bo), f"{n_pairs} string pairs"),
        "jaro_distance_batch": ((af, ao, bf, bo), f"{n_pairs} string pairs"),
        "haversine_m_batch": ((lat1, lon1, lat2, lon2), f"{n_points} point pairs"),
        "geohash_encode_batch": ((lat1, lon1, 6), f"{n_points} points @ precision 6"),
        "best_split_gini": ((x, y, w, feats, 1), f"{n_rows} rows x 4 features"),
        "best_split_sse": ((x, g, feats, 1), f"{n_rows} rows x 4 features"),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=20_000)
    parser.add_argument("--points", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    workloads = build_workloads(args.pairs, args.points)
    print(f"{'kernel':<22} {'workload':<28} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    print("-" * 84)
    for name, (call_args, desc) in workloads.items():
        t_np = time_call(getattr(numpy_impl, name), call_args, args.repeat)
        if numba_impl is None:
            print(f"{name:<22} {desc:<28} {t_np * 1e3:>8.1f}ms {'n/a':>10} {'n/a':>9}")
            continue
        fn = getattr(numba_impl, name)
        fn(*call_args)  # warmup: compile or load from cache
        t_nb = time_call(fn, call_args, args.repeat)
        print(
            f"{name:<22} {desc:<28} {t_np * 1e3:>8.1f}ms {t_nb * 1e3:>8.1f}ms {t_np / t_nb:>8.1f}x"
        )


if __name__ == "__main__":
    main()
