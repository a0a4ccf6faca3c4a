"""A small regression forest built from scratch on numba kernels.

Trees are grown CART-style on bootstrap resamples: at every node a random
subset of features is scanned for the split that maximizes variance
reduction, and nodes stop splitting once a child would fall under the
minimum leaf size. Leaf values are response means, and the forest predicts
the average over trees.

Randomness comes from a splitmix64 stream seeded per tree, so a fit is
bit-for-bit reproducible from its seed vector and is independent of any
global RNG state.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U64 = np.uint64
_MASK = _U64(0xFFFFFFFFFFFFFFFF)
_GAMMA = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _next_u64(state):
    state = (state + _GAMMA) & _MASK
    z = state
    z = ((z ^ (z >> _U64(30))) * _MIX1) & _MASK
    z = ((z ^ (z >> _U64(27))) * _MIX2) & _MASK
    return state, z ^ (z >> _U64(31))


@njit(cache=True, inline="always")
def _next_below(state, n):
    # fixed-point multiply keeps the draw in [0, n) without modulo bias
    state, z = _next_u64(state)
    return state, np.int64((z >> _U64(32)) * _U64(n) >> _U64(32))


@njit(cache=True)
def _grow_tree(X, y, mtry, min_leaf, seed,
               feature, threshold, left, right, value,
               idx, tmp, xv, cand, stack):
    n = X.shape[0]
    p = X.shape[1]
    state = _U64(seed)
    for i in range(n):
        state, j = _next_below(state, n)
        idx[i] = j
    n_nodes = 1
    top = 0
    stack[0, 0] = 0  # node id
    stack[0, 1] = 0  # segment start in idx
    stack[0, 2] = n  # segment end
    while top >= 0:
        node = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        top -= 1
        m = hi - lo
        total = 0.0
        for i in range(lo, hi):
            total += y[idx[i]]
        mean = total / m
        if m < 2 * min_leaf:
            feature[node] = -1
            value[node] = mean
            continue
        sq = 0.0
        for i in range(lo, hi):
            dv = y[idx[i]] - mean
            sq += dv * dv
        if sq <= 1e-12 * m:
            feature[node] = -1
            value[node] = mean
            continue
        for j in range(p):
            cand[j] = j
        for j in range(mtry):
            state, r = _next_below(state, p - j)
            cand[j], cand[j + r] = cand[j + r], cand[j]
        best_gain = -np.inf
        best_feature = -1
        best_threshold = 0.0
        for cj in range(mtry):
            f = cand[cj]
            for i in range(m):
                xv[i] = X[idx[lo + i], f]
            order = np.argsort(xv[:m], kind="mergesort")
            left_sum = 0.0
            for k in range(m - 1):
                i = order[k]
                left_sum += y[idx[lo + i]]
                n_left = k + 1
                if n_left < min_leaf or m - n_left < min_leaf:
                    continue
                if xv[order[k + 1]] <= xv[i]:
                    continue
                right_sum = total - left_sum
                gain = left_sum * left_sum / n_left + right_sum * right_sum / (m - n_left)
                if gain > best_gain:
                    best_gain = gain
                    best_feature = f
                    best_threshold = 0.5 * (xv[i] + xv[order[k + 1]])
        if best_feature < 0:
            feature[node] = -1
            value[node] = mean
            continue
        n_left = 0
        for i in range(lo, hi):
            if X[idx[i], best_feature] <= best_threshold:
                tmp[n_left] = idx[i]
                n_left += 1
        pos = n_left
        for i in range(lo, hi):
            if X[idx[i], best_feature] > best_threshold:
                tmp[pos] = idx[i]
                pos += 1
        for i in range(m):
            idx[lo + i] = tmp[i]
        child_l = n_nodes
        child_r = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feature
        threshold[node] = best_threshold
        left[node] = child_l
        right[node] = child_r
        top += 1
        stack[top, 0] = child_l
        stack[top, 1] = lo
        stack[top, 2] = lo + n_left
        top += 1
        stack[top, 0] = child_r
        stack[top, 1] = lo + n_left
        stack[top, 2] = hi
    return n_nodes


@njit(cache=True)
def build_forest(X, y, n_trees, mtry, min_leaf, tree_seeds):
    """Grow ``n_trees`` trees; returns stacked node arrays.

    Output arrays have shape (n_trees, max_nodes); ``feature[t, k] == -1``
    marks node k of tree t as a leaf holding ``value[t, k]``.
    """
    n = X.shape[0]
    p = X.shape[1]
    max_nodes = 2 * n + 1
    feature = np.empty((n_trees, max_nodes), np.int64)
    threshold = np.zeros((n_trees, max_nodes), np.float64)
    left = np.zeros((n_trees, max_nodes), np.int64)
    right = np.zeros((n_trees, max_nodes), np.int64)
    value = np.zeros((n_trees, max_nodes), np.float64)
    idx = np.empty(n, np.int64)
    tmp = np.empty(n, np.int64)
    xv = np.empty(n, np.float64)
    cand = np.empty(p, np.int64)
    stack = np.empty((max_nodes, 3), np.int64)
    for t in range(n_trees):
        _grow_tree(X, y, mtry, min_leaf, tree_seeds[t],
                   feature[t], threshold[t], left[t], right[t], value[t],
                   idx, tmp, xv, cand, stack)
    return feature, threshold, left, right, value


@njit(cache=True)
def predict_forest(feature, threshold, left, right, value, Xq):
    """Average the per-tree predictions for every row of ``Xq``."""
    n_trees = feature.shape[0]
    nq = Xq.shape[0]
    out = np.zeros(nq, np.float64)
    for t in range(n_trees):
        for qi in range(nq):
            node = 0
            while feature[t, node] >= 0:
                if Xq[qi, feature[t, node]] <= threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            out[qi] += value[t, node]
    return out / n_trees
