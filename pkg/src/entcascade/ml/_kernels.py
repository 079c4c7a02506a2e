"""Compiled CART growers and tree traversal.

Feature sampling draws from SplitMix64: draw ``n`` of a tree seeded with ``s``
is ``mix(s + (n + 1) * GAMMA)``, so the stream is a pure function of the seed
and the draw counter. Nodes are grown depth first, left child first, which
fixes the order in which draws are consumed.
"""

from __future__ import annotations

import numpy as np
from numba import njit

GAMMA = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def splitmix64_py(state: int) -> tuple[int, int]:
    """Reference implementation; returns (next_state, output)."""
    state = (state + GAMMA) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


@njit(cache=True, nogil=True)
def splitmix64(state):
    state = state + np.uint64(GAMMA)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _midpoint(lo, hi):
    t = lo / 2.0 + hi / 2.0
    if t >= hi or t < lo:
        t = lo
    return t


@njit(cache=True, nogil=True)
def _partition(X, idx, start, end, f, thr, buf):
    """Stable partition of idx[start:end] on X[:, f] <= thr; returns the split point."""
    nl = 0
    for i in range(start, end):
        if X[idx[i], f] <= thr:
            buf[nl] = idx[i]
            nl += 1
    k = nl
    for i in range(start, end):
        if X[idx[i], f] > thr:
            buf[k] = idx[i]
            k += 1
    for i in range(end - start):
        idx[start + i] = buf[i]
    return start + nl


@njit(cache=True, nogil=True)
def grow_classifier(X, y, w, rows, n_classes, max_depth, max_features, min_rows, seed):
    """Greedy Gini CART over the given rows.

    Returns (feature, threshold, left, right, value, gain). Leaves have
    feature -1; value rows are class-probability vectors; gain is the weighted
    impurity decrease of each internal node.
    """
    n = rows.shape[0]
    d = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros((cap, n_classes))
    gain = np.zeros(cap)

    idx = rows.copy()
    buf = np.empty(n, np.int64)
    vals = np.empty(n)
    feats = np.arange(d)
    counts = np.empty(n_classes)
    lcount = np.empty(n_classes)
    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    state = np.uint64(seed)

    sp = 1
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        m = end - start

        counts[:] = 0.0
        for i in range(start, end):
            r = idx[i]
            counts[y[r]] += w[r]
        wn = counts.sum()
        sq = 0.0
        for k in range(n_classes):
            value[node, k] = counts[k] / wn
            sq += counts[k] * counts[k]
        impurity = 1.0 - sq / (wn * wn)
        if impurity <= 1e-12 or m < min_rows or (max_depth >= 0 and depth >= max_depth):
            continue

        if max_features < d:
            for i in range(d - 1):
                state, z = splitmix64(state)
                j = i + np.int64(z % np.uint64(d - i))
                tmp = feats[i]
                feats[i] = feats[j]
                feats[j] = tmp

        best_score = np.inf
        best_f = -1
        best_t = 0.0
        visited = 0
        for fi in range(d):
            if visited >= max_features:
                break
            f = feats[fi]
            for i in range(m):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals[:m], kind="mergesort")
            if vals[order[0]] == vals[order[m - 1]]:
                continue
            visited += 1
            lcount[:] = 0.0
            wl = 0.0
            for p in range(m - 1):
                r = idx[start + order[p]]
                lcount[y[r]] += w[r]
                wl += w[r]
                v0 = vals[order[p]]
                v1 = vals[order[p + 1]]
                if v0 < v1:
                    wr = wn - wl
                    if wr <= 0.0 or wl <= 0.0:
                        continue
                    sl = 0.0
                    sr = 0.0
                    for k in range(n_classes):
                        sl += lcount[k] * lcount[k]
                        c = counts[k] - lcount[k]
                        sr += c * c
                    score = (wn - sl / wl - sr / wr) / wn
                    if score < best_score:
                        best_score = score
                        best_f = f
                        best_t = _midpoint(v0, v1)
        if best_f < 0:
            continue

        mid = _partition(X, idx, start, end, best_f, best_t, buf)
        feature[node] = best_f
        threshold[node] = best_t
        gain[node] = wn * impurity - best_score * wn
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # right pushed first so the left subtree is grown first
        st_node[sp] = rnode
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lnode
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        gain[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def grow_regressor(X, target, rows, max_depth, min_rows):
    """Greedy squared-error CART; leaf values are left to the caller.

    Returns (feature, threshold, left, right, gain) with gain the decrease in
    summed squared error at each internal node.
    """
    n = rows.shape[0]
    d = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    gain = np.zeros(cap)

    idx = rows.copy()
    buf = np.empty(n, np.int64)
    vals = np.empty(n)
    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)

    sp = 1
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        m = end - start
        if m < min_rows or m < 2 or (max_depth >= 0 and depth >= max_depth):
            continue
        s = 0.0
        s2 = 0.0
        for i in range(start, end):
            t = target[idx[i]]
            s += t
            s2 += t * t
        sse = s2 - s * s / m
        if sse <= 1e-12 * max(1.0, s2):
            continue
        base = s * s / m

        best = -np.inf
        best_f = -1
        best_t = 0.0
        for f in range(d):
            for i in range(m):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals[:m], kind="mergesort")
            if vals[order[0]] == vals[order[m - 1]]:
                continue
            sl = 0.0
            for p in range(m - 1):
                sl += target[idx[start + order[p]]]
                v0 = vals[order[p]]
                v1 = vals[order[p + 1]]
                if v0 < v1:
                    nl = p + 1
                    nr = m - nl
                    sr = s - sl
                    proxy = sl * sl / nl + sr * sr / nr
                    if proxy > best:
                        best = proxy
                        best_f = f
                        best_t = _midpoint(v0, v1)
        if best_f < 0:
            continue

        mid = _partition(X, idx, start, end, best_f, best_t, buf)
        feature[node] = best_f
        threshold[node] = best_t
        gain[node] = max(best - base, 0.0)
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        st_node[sp] = rnode
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lnode
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        gain[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def apply_tree(feature, threshold, left, right, X):
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
