"""Recursive-bisection initialisation and Bayes-factor pruning of the tree."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import IO

import numpy as np

from ._core import grow_region
from .graph import Graph
from .inference import (FitConfig, Membership, global_update, run_deterministic,
                        score_proxy_tree)
from .kernels import BERNOULLI, Kernel, Prior, get_kernel
from .tree import Tree

log = logging.getLogger(__name__)

BISECT_SWEEPS = 20
BISECT_RESTARTS = 4
# a split is kept only if the posterior-mean rate across the two sides is at
# most this fraction of the smaller within-side rate
SPLIT_RATIO = 0.3


def grown_half(g: Graph, rng: np.random.Generator) -> np.ndarray:
    """Balanced random split: breadth-first region grown from a random vertex.

    The region takes ``n // 2`` vertices; on disconnected graphs growth
    restarts from another random unvisited vertex.  Returns a boolean mask.
    """
    return grow_region(g.indptr, g.indices, rng.permutation(g.n), g.n // 2)


def _bisect(g: Graph, kernel: Kernel, rule: str, a0: float, b0: float,
            rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Two-group hard fit, best of a few grown balanced starts.

    Returns the 0/1 sides and the ratio of the posterior-mean rate across
    the sides to the smaller within-side rate (``inf`` if a side is empty).
    """
    best, best_score, best_t = None, -np.inf, None
    for _ in range(BISECT_RESTARTS):
        mu = Membership(np.where(grown_half(g, rng), 1, 2).astype(np.int64))
        t = Tree(1, a0, b0)
        run_deterministic(g, mu, t, kernel, rule, restricted=False, max_sweeps=BISECT_SWEEPS)
        global_update(g, mu, t, kernel)
        score = score_proxy_tree(t, kernel)
        if score > best_score:
            best, best_score, best_t = mu.hard - 1, score, t
    t = best_t
    if np.any(t.N[2:] == 0):
        return best, np.inf
    if kernel.code == BERNOULLI:
        rate = t.alpha[1:] / (t.alpha[1:] + t.beta[1:])
    else:
        rate = t.alpha[1:] / t.beta[1:]
    return best, float(rate[0] / min(rate[1], rate[2]))


def bisect_init(g: Graph, depth: int, cfg: FitConfig | None = None,
                split_ratio: float = SPLIT_RATIO) -> Membership:
    """Hard leaf labels from repeated two-group splits.

    Each split runs the deterministic update on a depth-1 tree over the
    induced subgraph of one side; the label of a vertex spells out its
    left/right choices.  Sides with fewer than two vertices or no internal
    edges are not split further and keep the leftmost leaf of their subtree;
    neither is a side whose best split is not clearly assortative (cross
    rate above ``split_ratio`` times the smaller within rate), since greedy
    splits of a homogeneous block carve out dense cores from noise.
    """
    cfg = cfg or FitConfig()
    if depth < 1:
        raise ValueError("depth must be >= 1")
    kernel = get_kernel(cfg.model)
    rng = np.random.default_rng(cfg.seed)
    offset = np.zeros(g.n, dtype=np.int64)
    stack = [(np.arange(g.n, dtype=np.int64), 0, 0)]
    while stack:
        verts, level, prefix = stack.pop()
        if level == depth or len(verts) < 2:
            offset[verts] = prefix << (depth - level)
            continue
        sub = g.subgraph(verts) if len(verts) < g.n else g
        if sub.num_edges == 0:
            offset[verts] = prefix << (depth - level)
            continue
        side, ratio = _bisect(sub, kernel, cfg.local_rule, cfg.a0, cfg.b0, rng)
        if not ratio <= split_ratio:
            offset[verts] = prefix << (depth - level)
            continue
        # right pushed first so the left half is split first
        stack.append((verts[side == 1], level + 1, 2 * prefix + 1))
        stack.append((verts[side == 0], level + 1, 2 * prefix))
    return Membership(offset + 1)


@dataclass
class PrunedModel:
    """Result of collapsing subtrees of the fitted dendrogram.

    ``unit_of_leaf`` gives, for every leaf, the heap index of the pruned
    node that now represents it.  Units containing at least one vertex are
    numbered ``1..group_count`` from left to right; ``leaf_map`` maps the
    occupied original leaf labels onto those numbers.
    """

    kept_nodes: set[int]
    unit_of_leaf: np.ndarray
    collapsed: np.ndarray
    log_bf: np.ndarray
    leaf_map: dict[int, int]
    unit_group_of_leaf: np.ndarray
    group_count: int

    @property
    def group_of_leaf(self) -> np.ndarray:
        """Group number per leaf label - 1 (0 for leaves without vertices)."""
        out = np.zeros(len(self.unit_of_leaf), dtype=np.int64)
        for leaf, grp in self.leaf_map.items():
            out[leaf - 1] = grp
        return out

    @property
    def unit_count(self) -> int:
        return len(np.unique(self.unit_of_leaf))

    def write(self, stream: IO[str]) -> None:
        for leaf in sorted(self.leaf_map):
            stream.write(f"{leaf}\t{self.leaf_map[leaf]}\n")


def read_pruned(stream: IO[str]) -> dict[int, int]:
    out = {}
    for line in stream:
        if line.strip():
            a, b = line.split("\t")
            out[int(a)] = int(b)
    return out


def prune(t: Tree, kernel: Kernel, threshold: float = 0.0,
          occupied: np.ndarray | None = None) -> PrunedModel:
    """Collapse subtrees whose pooled single-block marginal likelihood wins.

    Bottom-up, each internal node ``r`` compares the log marginal likelihood
    of all statistics below it pooled into one block against the sum over
    the nodes that are still separate below it; the subtree collapses when
    the log Bayes factor is at least ``threshold``.  ``occupied`` marks
    leaves holding vertices (default: leaves with positive mass ``N``).
    """
    K, D = t.K, t.depth
    prior = Prior(t.a0, t.b0)

    def lm(E, W):
        E = np.maximum(E, 0.0)
        W = np.maximum(W, 0.0)
        if kernel.code == BERNOULLI:
            W = np.maximum(W, E)
        return kernel.log_marginal(prior, E, W)

    pooled_E = t.E.copy()
    pooled_W = t.W.copy()
    kept = np.zeros(2 * K)
    kept[1:] = lm(t.E[1:], t.W[1:])
    collapsed = np.zeros(2 * K, dtype=bool)
    log_bf = np.full(2 * K, np.nan)
    for lvl in range(D - 1, -1, -1):
        idx = np.arange(1 << lvl, 1 << (lvl + 1))
        lc, rc = 2 * idx, 2 * idx + 1
        pooled_E[idx] += pooled_E[lc] + pooled_E[rc]
        pooled_W[idx] += pooled_W[lc] + pooled_W[rc]
        separate = kept[idx] + kept[lc] + kept[rc]
        merged = lm(pooled_E[idx], pooled_W[idx])
        bf = merged - separate
        log_bf[idx] = bf
        do = bf >= threshold
        collapsed[idx] = do
        kept[idx] = np.where(do, merged, separate)

    leaves = np.arange(K, 2 * K)
    unit = leaves.copy()
    done = np.zeros(K, dtype=bool)
    for lvl in range(D):
        anc = leaves >> (D - lvl)
        hit = collapsed[anc] & ~done
        unit[hit] = anc[hit]
        done |= hit
    inside = np.zeros(2 * K, dtype=bool)
    for lvl in range(D):
        idx = np.arange(1 << lvl, 1 << (lvl + 1))
        below = inside[idx] | collapsed[idx]
        inside[2 * idx] = below
        inside[2 * idx + 1] = below
    kept_nodes = set(np.flatnonzero(~inside[1:]) + 1)

    if occupied is None:
        occupied = t.N[K:] > 0
    occupied = np.asarray(occupied, dtype=bool)
    group_num: dict[int, int] = {}
    leaf_map: dict[int, int] = {}
    unit_group = np.zeros(K, dtype=np.int64)
    for k in range(K):
        if occupied[k]:
            u = int(unit[k])
            if u not in group_num:
                group_num[u] = len(group_num) + 1
            leaf_map[k + 1] = group_num[u]
    for k in range(K):
        unit_group[k] = group_num.get(int(unit[k]), 0)
    return PrunedModel(kept_nodes, unit, collapsed, log_bf, leaf_map, unit_group,
                       len(group_num))
