"""Compiled kernels for growing and evaluating classification trees.

Trees are stored as flat arrays: ``feature[i] == -1`` marks a leaf, otherwise
rows with ``x[feature] <= threshold`` go to ``left[i]``. Randomness comes from
a splitmix64 stream per tree, so a tree depends only on its own seed.
"""

import numpy as np
from numba import njit

MIN_GAIN = 1e-12
# a candidate must beat the incumbent split by this relative margin, so that
# exact ties resolve to the first candidate however the counts are scaled
TIE_RTOL = 1e-12


@njit(cache=True)
def _next_u64(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _randbelow(state, n):
    return np.int64(_next_u64(state) % np.uint64(n))


@njit(cache=True, nogil=True)
def grow_tree(X, y, w, order, mtry, min_node, state):
    """Greedy Gini tree on rows of ``X`` weighted by integer counts ``w``.

    A weight of ``c`` behaves exactly like ``c`` duplicated rows; zero-weight
    rows are ignored. ``order[f]`` must sort all rows by ``X[:, f]``.
    Feature subsets are drawn from ``state``.
    """
    n_all, p = X.shape
    m = 0
    for i in range(n_all):
        if w[i] > 0:
            m += 1
    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    n0 = np.zeros(cap, dtype=np.int64)
    n1 = np.zeros(cap, dtype=np.int64)
    gain = np.zeros(cap)

    idx = np.empty((p, m), dtype=np.int64)
    for f in range(p):
        a = 0
        for i in range(n_all):
            r = order[f, i]
            if w[r] > 0:
                idx[f, a] = r
                a += 1
    w1 = np.empty(n_all, dtype=np.int64)
    for i in range(n_all):
        w1[i] = w[i] if y[i] == 1 else 0
    buf = np.empty(m, dtype=np.int64)
    goes_left = np.zeros(n_all, dtype=np.bool_)
    perm = np.arange(p)

    stack_node = np.empty(cap, dtype=np.int64)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = m
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        c0 = 0
        c1 = 0
        for i in range(start, end):
            r = idx[0, i]
            c1 += w1[r]
            c0 += w[r]
        c0 -= c1
        size = c0 + c1
        n0[node] = c0
        n1[node] = c1
        if c0 == 0 or c1 == 0 or size < min_node:
            continue

        for i in range(mtry):
            j = i + _randbelow(state, p - i)
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp

        fn = float(size)
        parent = 1.0 - (c0 / fn) ** 2 - (c1 / fn) ** 2
        # child impurity sum(n_c * gini_c) = size - sum_c (a_c^2 + b_c^2) / n_c,
        # so the best split maximises the score below
        best_score = -1.0
        best_f = -1
        best_pos = -1
        for q in range(mtry):
            f = perm[q]
            nl = 0
            l1 = 0
            x_next = X[idx[f, start], f]
            for i in range(start, end - 1):
                r = idx[f, i]
                nl += w[r]
                l1 += w1[r]
                x_here = x_next
                x_next = X[idx[f, i + 1], f]
                if x_here < x_next:
                    l0 = nl - l1
                    r0 = c0 - l0
                    r1 = c1 - l1
                    score = (l0 * l0 + l1 * l1) / float(l0 + l1) + (r0 * r0 + r1 * r1) / float(r0 + r1)
                    if score > best_score * (1.0 + TIE_RTOL):
                        best_score = score
                        best_f = f
                        best_pos = i
        if best_f < 0:
            continue
        g = parent - (fn - best_score) / fn
        if not g > MIN_GAIN:
            continue

        lo = X[idx[best_f, best_pos], best_f]
        hi = X[idx[best_f, best_pos + 1], best_f]
        thr = 0.5 * (lo + hi)
        if not thr < hi:
            thr = lo
        n_left = best_pos - start + 1
        for i in range(start, end):
            goes_left[idx[best_f, i]] = i - start < n_left
        for f in range(p):
            a = 0
            b = n_left
            for i in range(start, end):
                r = idx[f, i]
                if goes_left[r]:
                    buf[a] = r
                    a += 1
                else:
                    buf[b] = r
                    b += 1
            for i in range(end - start):
                idx[f, start + i] = buf[i]

        feature[node] = best_f
        threshold[node] = thr
        gain[node] = g
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        # right pushed first so the left subtree is expanded first
        stack_node[top] = rc
        stack_start[top] = start + n_left
        stack_end[top] = end
        top += 1
        stack_node[top] = lc
        stack_start[top] = start
        stack_end[top] = start + n_left
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), n0[:n_nodes].copy(), n1[:n_nodes].copy(),
            gain[:n_nodes].copy())


@njit(cache=True, nogil=True)
def grow_forest(X, y, order, seeds, mtry, min_node, bootstrap):
    """One tree per seed, each on an n-out-of-n bootstrap when ``bootstrap``.

    Returns the concatenated tree arrays and per-tree node offsets.
    """
    n = X.shape[0]
    ntree = seeds.shape[0]
    offsets = np.zeros(ntree + 1, dtype=np.int64)
    feats = []
    thrs = []
    lefts = []
    rights = []
    n0s = []
    n1s = []
    gains = []
    state = np.zeros(1, dtype=np.uint64)
    counts = np.empty(n, dtype=np.int64)
    for t in range(ntree):
        state[0] = seeds[t]
        if bootstrap:
            counts[:] = 0
            for i in range(n):
                counts[_randbelow(state, n)] += 1
        else:
            counts[:] = 1
        out = grow_tree(X, y, counts, order, mtry, min_node, state)
        feats.append(out[0])
        thrs.append(out[1])
        lefts.append(out[2])
        rights.append(out[3])
        n0s.append(out[4])
        n1s.append(out[5])
        gains.append(out[6])
        offsets[t + 1] = offsets[t] + out[0].shape[0]

    total = offsets[ntree]
    feature = np.empty(total, dtype=np.int64)
    threshold = np.empty(total)
    left = np.empty(total, dtype=np.int64)
    right = np.empty(total, dtype=np.int64)
    n0 = np.empty(total, dtype=np.int64)
    n1 = np.empty(total, dtype=np.int64)
    gain = np.empty(total)
    for t in range(ntree):
        a = offsets[t]
        b = offsets[t + 1]
        feature[a:b] = feats[t]
        threshold[a:b] = thrs[t]
        left[a:b] = lefts[t]
        right[a:b] = rights[t]
        n0[a:b] = n0s[t]
        n1[a:b] = n1s[t]
        gain[a:b] = gains[t]
    return feature, threshold, left, right, n0, n1, gain, offsets


@njit(cache=True, nogil=True)
def leaf_proportions(X, feature, threshold, left, right, n0, n1, offsets):
    """``(n_rows, n_trees)`` class-1 share of the leaf each row lands in."""
    n = X.shape[0]
    ntree = offsets.shape[0] - 1
    out = np.empty((n, ntree))
    for t in range(ntree):
        base = offsets[t]
        for i in range(n):
            node = 0
            while feature[base + node] >= 0:
                k = base + node
                if X[i, feature[k]] <= threshold[k]:
                    node = left[k]
                else:
                    node = right[k]
            k = base + node
            out[i, t] = n1[k] / (n0[k] + n1[k])
    return out


@njit(cache=True, nogil=True)
def mean_leaf_proportion(X, feature, threshold, left, right, n0, n1, offsets):
    """Per-row mean over trees of the reached leaf's class-1 share.

    Trees are summed in index order for every row.
    """
    n = X.shape[0]
    ntree = offsets.shape[0] - 1
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for t in range(ntree):
            base = offsets[t]
            node = 0
            while feature[base + node] >= 0:
                k = base + node
                if X[i, feature[k]] <= threshold[k]:
                    node = left[k]
                else:
                    node = right[k]
            k = base + node
            acc += n1[k] / (n0[k] + n1[k])
        out[i] = acc / ntree
    return out
