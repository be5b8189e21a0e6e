"""Compiled inner loops for the deterministic tree updates.

Everything here works on flat heap-indexed arrays (see ``tree.py``) with
leaves stored as heap indices.  Kernel and rule are passed as the integer
codes from ``kernels.py``.
"""
import math

import numpy as np
from numba import njit

POISSON = 0
BERNOULLI = 1
RULE_MF = 0

# counters layout
C_VERTICES, C_NEIGHBORS, C_TOUCHED, C_VISITED = 0, 1, 2, 3
N_COUNTERS = 4


@njit(cache=True)
def digamma(x):
    """psi(x) for x > 0: upward recurrence then the asymptotic series."""
    acc = 0.0
    while x < 8.0:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    # Bernoulli-number series, truncation error < 1e-15 for x >= 8
    series = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (
        1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12.0))))))
    return acc + math.log(x) - 0.5 * inv - series


@njit(cache=True)
def node_score(kind, rule, a0, b0, E, W, e, w):
    """Log score of statistics (e, w) at a node with accumulated (E, W)."""
    if e == 0.0 and w == 0.0:
        return 0.0
    alpha = a0 + E
    if kind == POISSON:
        beta = b0 + W
        if rule == RULE_MF:
            return e * (digamma(alpha) - math.log(beta)) - w * alpha / beta
        if e == 0.0:
            return alpha * (math.log(beta) - math.log(beta + w))
        return (math.lgamma(alpha + e) - math.lgamma(alpha) + alpha * math.log(beta)
                - (alpha + e) * math.log(beta + w))
    beta = b0 + W - E
    if rule == RULE_MF:
        pb = digamma(beta)
        return e * (digamma(alpha) - pb) + w * (pb - digamma(alpha + beta))
    return (math.lgamma(alpha + e) + math.lgamma(beta + w - e) - math.lgamma(alpha + beta + w)
            - math.lgamma(alpha) - math.lgamma(beta) + math.lgamma(alpha + beta))


@njit(cache=True)
def max_grad_path(root, depth, dsub, expo, scale, E, W, kind, rule, a0, b0, counters):
    """Best leaf under ``root`` by path-summed score.

    ``dsub[v]`` is the vertex's edge weight into the leaves below ``v`` and
    ``scale * expo[v]`` its exposure there.  The search is exact: every node
    term with zero edge mass is <= 0, so a subtree without neighbours can
    never beat the prefix score accumulated above it, which lets untouched
    subtrees be skipped once an incumbent is at least as good.  Ties go to
    the smallest leaf.

    Returns ``(score, leaf_heap_index, e_total, w_total)``.
    """
    K = 1 << depth
    cap = 2 * depth + 4
    st_node = np.empty(cap, dtype=np.int64)
    st_pre = np.empty(cap, dtype=np.float64)
    sp = 0
    st_node[0] = root
    st_pre[0] = 0.0
    sp = 1
    best = -np.inf
    best_leaf = -1
    visited = 0
    while sp > 0:
        sp -= 1
        v = st_node[sp]
        prefix = st_pre[sp]
        visited += 1
        if dsub[v] == 0.0 and best_leaf >= 0:
            if prefix < best:
                continue
            if prefix == best:
                shift = depth - (63 - _clz64(v))
                if (v << shift) > best_leaf:
                    continue
        if v >= K:
            sc = prefix + node_score(kind, rule, a0, b0, E[v], W[v], dsub[v], scale * expo[v])
            if sc > best or (sc == best and v < best_leaf):
                best = sc
                best_leaf = v
            continue
        lc = 2 * v
        rc = lc + 1
        p_left = prefix + node_score(kind, rule, a0, b0, E[v], W[v], dsub[rc], scale * expo[rc])
        p_right = prefix + node_score(kind, rule, a0, b0, E[v], W[v], dsub[lc], scale * expo[lc])
        if dsub[rc] > 0.0 and dsub[lc] == 0.0:
            # right first: push left underneath
            st_node[sp] = lc
            st_pre[sp] = p_left
            st_node[sp + 1] = rc
            st_pre[sp + 1] = p_right
        else:
            st_node[sp] = rc
            st_pre[sp] = p_right
            st_node[sp + 1] = lc
            st_pre[sp + 1] = p_left
        sp += 2
    counters[C_VISITED] += visited
    return best, best_leaf, dsub[root], scale * expo[root]


@njit(cache=True)
def _clz64(v):
    # number of leading zeros of a positive int64 (v < 2**62)
    n = 0
    x = v
    while x > 0:
        x >>= 1
        n += 1
    return 64 - n


@njit(cache=True)
def remove_vertex(h, di, two_m, dsub, E, W, vol, N, kind):
    """Subtract a hard-assigned vertex at leaf ``h`` from all node statistics."""
    inv = di / two_m if two_m > 0 else 0.0
    vol[h] -= di
    N[h] -= 1.0
    E[h] -= dsub[h]
    if kind == POISSON:
        W[h] -= inv * vol[h]
    else:
        W[h] -= N[h]
    child = h
    r = h >> 1
    while r >= 1:
        sib = child ^ 1
        E[r] -= dsub[sib]
        if kind == POISSON:
            W[r] -= inv * vol[sib]
        else:
            W[r] -= N[sib]
        vol[r] -= di
        N[r] -= 1.0
        child = r
        r >>= 1


@njit(cache=True)
def insert_vertex(h, di, two_m, dsub, E, W, vol, N, kind):
    """Add a hard-assigned vertex at leaf ``h`` to all node statistics."""
    inv = di / two_m if two_m > 0 else 0.0
    E[h] += dsub[h]
    if kind == POISSON:
        W[h] += inv * vol[h]
    else:
        W[h] += N[h]
    vol[h] += di
    N[h] += 1.0
    child = h
    r = h >> 1
    while r >= 1:
        sib = child ^ 1
        E[r] += dsub[sib]
        if kind == POISSON:
            W[r] += inv * vol[sib]
        else:
            W[r] += N[sib]
        vol[r] += di
        N[r] += 1.0
        child = r
        r >>= 1


@njit(cache=True)
def sweep_deterministic(order, indptr, indices, weights, degree, two_m, labels,
                        E, W, vol, N, depth, kind, rule, a0, b0, restricted,
                        dsub, touched, counters):
    """One Gauss-Seidel pass of hard reassignments; returns the number moved.

    ``labels`` holds leaf heap indices and is updated in place together with
    the node statistics.  ``dsub`` must be all-zero on entry and is left so.
    """
    moved = 0
    for t in range(order.shape[0]):
        i = order[t]
        cur = labels[i]
        di = degree[i]
        lo_leaf = cur
        hi_leaf = cur
        nt = 0
        for p in range(indptr[i], indptr[i + 1]):
            x = weights[p]
            if x <= 0.0:
                continue
            h = labels[indices[p]]
            if h < lo_leaf:
                lo_leaf = h
            if h > hi_leaf:
                hi_leaf = h
            while h >= 1:
                if dsub[h] == 0.0:
                    touched[nt] = h
                    nt += 1
                dsub[h] += x
                h >>= 1
        counters[C_VERTICES] += 1
        counters[C_NEIGHBORS] += indptr[i + 1] - indptr[i]
        counters[C_TOUCHED] += nt

        remove_vertex(cur, di, two_m, dsub, E, W, vol, N, kind)
        root = 1
        if restricted:
            x, y = lo_leaf, hi_leaf
            while x != y:
                x >>= 1
                y >>= 1
            root = x
        if kind == POISSON:
            scale = di / two_m if two_m > 0 else 0.0
            _, best, _, _ = max_grad_path(root, depth, dsub, vol, scale, E, W, kind, rule,
                                          a0, b0, counters)
        else:
            _, best, _, _ = max_grad_path(root, depth, dsub, N, 1.0, E, W, kind, rule,
                                          a0, b0, counters)
        insert_vertex(best, di, two_m, dsub, E, W, vol, N, kind)
        if best != cur:
            labels[i] = best
            moved += 1
        for q in range(nt):
            dsub[touched[q]] = 0.0
    return moved


@njit(cache=True)
def grow_region(indptr, indices, order, target):
    """Breadth-first region of ``target`` vertices seeded along ``order``.

    Growth restarts from the next unvisited vertex of ``order`` whenever the
    current component is exhausted.  Returns a boolean mask.
    """
    n = indptr.shape[0] - 1
    inside = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    pos = 0
    count = 0
    while count < target:
        if head == tail:
            while inside[order[pos]]:
                pos += 1
            v = order[pos]
            inside[v] = True
            queue[tail] = v
            tail += 1
            count += 1
            continue
        v = queue[head]
        head += 1
        for p in range(indptr[v], indptr[v + 1]):
            if count >= target:
                break
            u = indices[p]
            if not inside[u]:
                inside[u] = True
                queue[tail] = u
                tail += 1
                count += 1
    return inside
