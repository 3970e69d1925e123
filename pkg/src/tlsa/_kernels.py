"""Batched per-row top-k / threshold / verdict kernel.

This is the hot inner loop of semantic alignment: for every similarity row,
pick the top-k columns, locate the largest consecutive gap, form the
adaptive threshold, and mark the surviving prediction-set entries.

Two interchangeable backends produce bit-identical results: a numba
``@njit`` kernel and a pure-numpy fallback. Set ``TLSA_PURE_NUMPY=1`` to
force the fallback (the benchmark in ``benchmarks/bench_align.py`` compares
both). All threshold arithmetic is float64 with sequential accumulation so
the backends agree exactly.

Mode codes: 0 = min(tau_gap, tau_avg) (the default rule), 1 = tau_gap only,
2 = tau_avg only.
"""
from __future__ import annotations

import os

import numpy as np

MODE_MIN = 0
MODE_GAP = 1
MODE_AVG = 2

_FORCE_NUMPY = os.environ.get("TLSA_PURE_NUMPY", "") not in ("", "0")


def analyze_rows_numpy(scores, k, n_source, mode=MODE_MIN):
    """Vectorized fallback; see module docstring for the contract."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    order = np.argsort(-scores, axis=1, kind="stable")
    topk_idx = order[:, :k].astype(np.int64)
    topk = np.take_along_axis(scores, topk_idx, axis=1)

    gaps = topk[:, :-1] - topk[:, 1:]  # (n, k-1)
    j_gap = np.argmax(gaps, axis=1).astype(np.int64) + 1  # first max -> smallest rank
    rows = np.arange(n)
    tau_gap = topk[rows, j_gap]

    tau_avg = np.zeros(n, dtype=np.float64)
    for j in range(k):  # sequential order matches the numba accumulator
        tau_avg += topk[:, j]
    tau_avg /= k

    if mode == MODE_GAP:
        tau_set = tau_gap.copy()
    elif mode == MODE_AVG:
        tau_set = tau_avg.copy()
    else:
        tau_set = np.minimum(tau_gap, tau_avg)

    keep = topk > tau_set[:, None]
    degenerate = topk[:, 0] == topk[:, k - 1]
    if np.any(degenerate):
        keep[degenerate] = False
        keep[degenerate, 0] = True
    has_source = np.any(keep & (topk_idx < n_source), axis=1)
    return topk_idx, topk, j_gap, tau_gap, tau_avg, tau_set, keep, has_source


def _analyze_rows_loop(scores, k, n_source, mode):
    n, c = scores.shape
    topk_idx = np.empty((n, k), dtype=np.int64)
    topk = np.empty((n, k), dtype=np.float64)
    j_gap = np.empty(n, dtype=np.int64)
    tau_gap = np.empty(n, dtype=np.float64)
    tau_avg = np.empty(n, dtype=np.float64)
    tau_set = np.empty(n, dtype=np.float64)
    keep = np.zeros((n, k), dtype=np.bool_)
    has_source = np.zeros(n, dtype=np.bool_)

    used = np.zeros(c, dtype=np.bool_)
    for i in range(n):
        # top-k by repeated scan: descending score, ties to the smaller column
        for j in range(k):
            best = -np.inf
            best_c = -1
            for col in range(c):
                if used[col]:
                    continue
                v = scores[i, col]
                if v > best:
                    best = v
                    best_c = col
            used[best_c] = True
            topk_idx[i, j] = best_c
            topk[i, j] = best
        for j in range(k):
            used[topk_idx[i, j]] = False

        best_gap = -np.inf
        jg = 1
        for j in range(1, k):
            g = topk[i, j - 1] - topk[i, j]
            if g > best_gap:
                best_gap = g
                jg = j
        j_gap[i] = jg
        tau_gap[i] = topk[i, jg]

        acc = 0.0
        for j in range(k):
            acc += topk[i, j]
        tau_avg[i] = acc / k

        if mode == MODE_GAP:
            ts = tau_gap[i]
        elif mode == MODE_AVG:
            ts = tau_avg[i]
        else:
            ts = min(tau_gap[i], tau_avg[i])
        tau_set[i] = ts

        if topk[i, 0] == topk[i, k - 1]:
            keep[i, 0] = True
        else:
            for j in range(k):
                keep[i, j] = topk[i, j] > ts
        for j in range(k):
            if keep[i, j] and topk_idx[i, j] < n_source:
                has_source[i] = True
                break
    return topk_idx, topk, j_gap, tau_gap, tau_avg, tau_set, keep, has_source


if not _FORCE_NUMPY:
    try:
        from numba import njit

        _analyze_rows_nb = njit(cache=True)(_analyze_rows_loop)
        HAS_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAS_NUMBA = False
else:
    HAS_NUMBA = False


def analyze_rows_numba(scores, k, n_source, mode=MODE_MIN):
    if not HAS_NUMBA:
        raise RuntimeError("numba backend unavailable (TLSA_PURE_NUMPY set or numba missing)")
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    return _analyze_rows_nb(scores, k, n_source, mode)


if HAS_NUMBA:
    analyze_rows = analyze_rows_numba
    BACKEND = "numba"
else:
    analyze_rows = analyze_rows_numpy
    BACKEND = "numpy"


def backend_name() -> str:
    return BACKEND
