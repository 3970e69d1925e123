"""Time the row-analysis kernel: compiled backend vs the numpy fallback.

Run: python benchmarks/bench_align.py [n_rows] [n_labels] [k]
The compiled path is skipped when numba is unavailable or TLSA_PURE_NUMPY
is set.
"""
from __future__ import annotations

import sys
import time

import numpy as np

from tlsa import _kernels


def bench(fn, scores, k, n_source, repeats=5):
    fn(scores[:64], k, n_source, _kernels.MODE_MIN)  # warmup / JIT compile
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(scores, k, n_source, _kernels.MODE_MIN)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 20000
    c = int(sys.argv[2]) if len(sys.argv) > 2 else 200
    k = int(sys.argv[3]) if len(sys.argv) > 3 else 5
    rng = np.random.default_rng(0)
    scores = rng.standard_normal((n, c))
    n_source = c // 2

    t_np = bench(_kernels.analyze_rows_numpy, scores, k, n_source)
    print(f"numpy   : {t_np * 1e3:8.2f} ms  ({n} rows x {c} labels, k={k})")
    try:
        t_nb = bench(_kernels.analyze_rows_numba, scores, k, n_source)
    except RuntimeError as exc:
        print(f"compiled: unavailable ({exc})")
        return 0
    print(f"compiled: {t_nb * 1e3:8.2f} ms  (speedup x{t_np / t_nb:.2f})")

    a = _kernels.analyze_rows_numpy(scores, k, n_source, _kernels.MODE_MIN)
    b = _kernels.analyze_rows_numba(scores, k, n_source, _kernels.MODE_MIN)
    same = all(np.array_equal(x, y) for x, y in zip(a, b))
    print(f"bit-identical outputs: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
