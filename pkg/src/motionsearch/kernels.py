"""Hot loops for dissimilar-subset selection (greedy + 1-swap local search).

Kernels are numba-compiled by default; set ``MOTIONSEARCH_NO_NUMBA=1`` to
force the pure-numpy fallbacks (same results, slower).  A small benchmark
comparing both lives in ``benchmarks/bench_kernels.py``.
"""

from __future__ import annotations

import itertools
import math
import os

import numpy as np

USE_NUMBA = os.environ.get("MOTIONSEARCH_NO_NUMBA", "") not in ("1", "true")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:            # pragma: no cover
        USE_NUMBA = False

if not USE_NUMBA:
    def njit(*args, **kwargs):
        def deco(f):
            return f
        if args and callable(args[0]):
            return args[0]
        return deco


@njit(cache=True)
def _greedy_subset(sim, m):
    n = sim.shape[0]
    chosen = np.zeros(n, dtype=np.bool_)
    order = np.empty(m, dtype=np.int64)
    # seed with the globally least-similar pair (ties: lexicographic)
    bi, bj = 0, 1
    best = sim[0, 1]
    for i in range(n):
        for j in range(i + 1, n):
            if sim[i, j] < best:
                best = sim[i, j]
                bi, bj = i, j
    order[0] = bi
    order[1] = bj
    chosen[bi] = True
    chosen[bj] = True
    # cost[c] = sum of sim to the current subset
    cost = np.empty(n)
    for c in range(n):
        cost[c] = sim[c, bi] + sim[c, bj]
    for t in range(2, m):
        bc = -1
        bcost = 1e300
        for c in range(n):
            if not chosen[c] and cost[c] < bcost:
                bcost = cost[c]
                bc = c
        order[t] = bc
        chosen[bc] = True
        for c in range(n):
            cost[c] += sim[c, bc]
    return order


@njit(cache=True)
def _local_search_1swap(sim, subset_in, max_iters):
    n = sim.shape[0]
    m = subset_in.shape[0]
    subset = subset_in.copy()
    inside = np.zeros(n, dtype=np.bool_)
    for t in range(m):
        inside[subset[t]] = True
    # attach[c] = sum over subset of sim[c, s]
    attach = np.zeros(n)
    for c in range(n):
        acc = 0.0
        for t in range(m):
            acc += sim[c, subset[t]]
        attach[c] = acc
    for _ in range(max_iters):
        best_delta = -1e-12
        bt, bo = -1, -1
        for t in range(m):
            i = subset[t]
            removed = attach[i] - sim[i, i]
            for o in range(n):
                if inside[o]:
                    continue
                delta = (attach[o] - sim[o, i]) - removed
                if delta < best_delta:
                    best_delta = delta
                    bt, bo = t, o
        if bt < 0:
            break
        i = subset[bt]
        subset[bt] = bo
        inside[i] = False
        inside[bo] = True
        for c in range(n):
            attach[c] += sim[c, bo] - sim[c, i]
    return subset


def _greedy_subset_np(sim, m):
    n = sim.shape[0]
    iu = np.triu_indices(n, k=1)
    flat = np.argmin(sim[iu])
    bi, bj = int(iu[0][flat]), int(iu[1][flat])
    chosen = [bi, bj]
    mask = np.zeros(n, dtype=bool)
    mask[[bi, bj]] = True
    cost = sim[:, bi] + sim[:, bj]
    for _ in range(2, m):
        c = int(np.argmin(np.where(mask, np.inf, cost)))
        chosen.append(c)
        mask[c] = True
        cost = cost + sim[:, c]
    return np.array(chosen, dtype=np.int64)


def _local_search_1swap_np(sim, subset, max_iters):
    n = sim.shape[0]
    subset = subset.copy()
    inside = np.zeros(n, dtype=bool)
    inside[subset] = True
    attach = sim[:, subset].sum(axis=1)
    for _ in range(max_iters):
        removed = attach[subset] - sim[subset, subset]
        # delta[t, o] = objective change when subset[t] is swapped for o
        delta = (attach[None, :] - sim[subset, :]) - removed[:, None]
        delta[:, subset] = np.inf
        t, o = np.unravel_index(np.argmin(delta), delta.shape)
        if delta[t, o] >= -1e-12:
            break
        i = subset[t]
        subset[t] = o
        inside[i] = False
        inside[o] = True
        attach = attach + sim[:, o] - sim[:, i]
    return subset


EXACT_LIMIT = 20000     # exhaust instances with at most this many subsets


def _exhaustive_subset(sim: np.ndarray, m: int) -> np.ndarray:
    best, best_obj = None, np.inf
    for combo in itertools.combinations(range(sim.shape[0]), m):
        idx = np.array(combo)
        sub = sim[np.ix_(idx, idx)]
        obj = (sub.sum() - np.trace(sub)) / 2.0
        if obj < best_obj:
            best_obj = obj
            best = idx
    return best.astype(np.int64)


def dissimilar_subset(sim: np.ndarray, m: int,
                      max_iters: int = 10000) -> np.ndarray:
    """Indices of m items minimizing the within-subset similarity sum.

    Small instances are solved exactly by enumeration; larger ones use a
    greedy construction followed by 1-swap descent.  Deterministic given
    the matrix; returned sorted ascending."""
    n = sim.shape[0]
    if m > n:
        raise ValueError(f"subset size {m} exceeds {n} items")
    if m == n:
        return np.arange(n, dtype=np.int64)
    if m <= 0:
        return np.zeros(0, dtype=np.int64)
    if m == 1:
        return np.array([int(np.argmin(sim.sum(axis=1)))], dtype=np.int64)
    sim = np.ascontiguousarray(sim, dtype=np.float64)
    if math.comb(n, m) <= EXACT_LIMIT:
        return _exhaustive_subset(sim, m)
    if USE_NUMBA:
        subset = _greedy_subset(sim, m)
        subset = _local_search_1swap(sim, subset, max_iters)
    else:
        subset = _greedy_subset_np(sim, m)
        subset = _local_search_1swap_np(sim, subset, max_iters)
    return np.sort(subset)


def subset_objective(sim: np.ndarray, subset: np.ndarray) -> float:
    """Sum of pairwise similarities over unordered pairs in the subset."""
    sub = sim[np.ix_(subset, subset)]
    return float((sub.sum() - np.trace(sub)) / 2.0)
