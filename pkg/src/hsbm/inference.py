"""Variational inference for hierarchical block models.

The fit alternates a global update, which recomputes every node's
conjugate posterior from membership statistics, with a sweep of local
updates that reassign one vertex at a time by scoring root-to-leaf paths of
the dendrogram.  Before a vertex is scored its own contribution is removed
from all node statistics and re-added afterwards, so node posteriors stay
current throughout the sweep.

Two local update modes exist: ``deterministic`` (hard argmax assignments,
compiled branch-and-bound over the tree) and ``probabilistic`` (soft rows
from two tree passes, vectorised with numpy).
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, asdict
from typing import IO, NamedTuple

import numpy as np

from . import _core
from .graph import Graph
from .kernels import (BERNOULLI, POISSON, Kernel, Prior, SuffStat, get_kernel,
                      rule_code)
from .tree import MAX_DEPTH, Tree, aggregate_up, lca_heap

log = logging.getLogger(__name__)


@dataclass
class Membership:
    """Group assignment per vertex.

    ``hard`` holds 1-based leaf labels.  ``soft`` is an optional dense
    ``(n, K)`` matrix of membership probabilities; when present ``hard`` is
    its row-wise argmax.
    """

    hard: np.ndarray
    soft: np.ndarray | None = None

    @classmethod
    def from_labels(cls, labels) -> "Membership":
        return cls(np.asarray(labels, dtype=np.int64).copy())

    @classmethod
    def from_soft(cls, soft) -> "Membership":
        soft = np.asarray(soft, dtype=np.float64)
        return cls(np.argmax(soft, axis=1).astype(np.int64) + 1, soft.copy())

    @property
    def n(self) -> int:
        return len(self.hard)

    def dense(self, K: int) -> np.ndarray:
        if self.soft is not None:
            return self.soft
        out = np.zeros((self.n, K))
        out[np.arange(self.n), self.hard - 1] = 1.0
        return out

    def copy(self) -> "Membership":
        return Membership(self.hard.copy(), None if self.soft is None else self.soft.copy())


@dataclass
class FitConfig:
    model: str = "hdsb"
    local_rule: str = "collapsed"
    update_mode: str = "deterministic"
    restricted: bool = True
    depth: int | str = "auto"
    a0: float = 1.0
    b0: float = 1.0
    max_sweeps: int | None = None
    tol: float = 1e-6
    seed: int = 0
    sweep_order: str = "ascending"
    init: str = "bisect"
    prune_threshold: float = 0.0

    def __post_init__(self):
        if self.model not in ("hdsb", "hsb"):
            raise ValueError(f"model must be hdsb or hsb, got {self.model!r}")
        rule_code(self.local_rule)
        if self.update_mode not in ("deterministic", "probabilistic"):
            raise ValueError(f"unknown update mode {self.update_mode!r}")
        if self.sweep_order not in ("ascending", "shuffled"):
            raise ValueError(f"unknown sweep order {self.sweep_order!r}")
        if self.init not in ("bisect", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.depth != "auto" and not (isinstance(self.depth, (int, np.integer))
                                         and 1 <= self.depth <= MAX_DEPTH):
            raise ValueError(f"depth must be 'auto' or an integer in [1, {MAX_DEPTH}]")
        Prior(self.a0, self.b0)
        if self.max_sweeps is None:
            self.max_sweeps = 20 if self.update_mode == "deterministic" else 100
        if self.max_sweeps < 0:
            raise ValueError("max_sweeps must be nonnegative")

    def resolve_depth(self, n: int) -> int:
        if self.depth == "auto":
            return auto_depth(n)
        return int(self.depth)

    def as_dict(self) -> dict:
        return asdict(self)


def auto_depth(n: int) -> int:
    """Depth giving roughly ten vertices per leaf."""
    if n <= 10:
        return 1
    return int(min(MAX_DEPTH, max(1, math.ceil(math.log2(n / 10)))))


class TraceRow(NamedTuple):
    sweep: int
    moved: int
    score: float
    millis: float


@dataclass
class FitResult:
    membership: Membership
    tree: Tree
    pruned: "PrunedModel"
    trace: list[TraceRow]
    converged: bool
    config: FitConfig
    counters: dict = field(default_factory=dict)

    @property
    def groups(self) -> np.ndarray:
        """Merged group label (1-based) per vertex after pruning."""
        return self.pruned.group_of_leaf[self.membership.hard - 1]

    @property
    def group_count(self) -> int:
        return self.pruned.group_count

    def group_probabilities(self) -> np.ndarray:
        """``(n, group_count)`` soft memberships pooled over merged leaves."""
        G = self.pruned.group_count
        if self.membership.soft is None:
            out = np.zeros((self.membership.n, G))
            out[np.arange(self.membership.n), self.groups - 1] = 1.0
            return out
        unit_group = self.pruned.unit_group_of_leaf
        out = np.zeros((self.membership.n, G))
        soft = self.membership.soft
        for k in range(soft.shape[1]):
            gk = unit_group[k]
            if gk > 0:
                out[:, gk - 1] += soft[:, k]
        s = out.sum(axis=1, keepdims=True)
        s[s == 0] = 1.0
        return out / s


# ---------------------------------------------------------------------------
# global update

def refresh_posteriors(t: Tree, kernel: Kernel) -> None:
    prior = Prior(t.a0, t.b0)
    E = np.maximum(t.E[1:], 0.0)
    W = np.maximum(t.W[1:], 0.0)
    if kernel.code == BERNOULLI:
        W = np.maximum(W, E)
    t.alpha[1:], t.beta[1:] = kernel.posterior_update(prior, E, W)


def _global_hard(g: Graph, labels: np.ndarray, t: Tree, kernel: Kernel) -> None:
    K, D = t.K, t.depth
    lab0 = np.asarray(labels, dtype=np.int64) - 1
    src, dst, w = g.edges()
    x = K + lab0[src]
    y = K + lab0[dst]
    for _ in range(D):
        diff = x != y
        if not diff.any():
            break
        x[diff] >>= 1
        y[diff] >>= 1
    t.E[:] = np.bincount(x, weights=w, minlength=2 * K)
    d = g.degree
    t.vol[:] = aggregate_up(np.bincount(lab0, weights=d, minlength=K), D)
    t.N[:] = aggregate_up(np.bincount(lab0, minlength=K).astype(np.float64), D)
    t.W[:] = 0.0
    internal = np.arange(1, K)
    if kernel.code == POISSON:
        two_m = g.total_degree
        if two_m > 0:
            sq = np.bincount(lab0, weights=d * d, minlength=K)
            t.W[K:] = (t.vol[K:] ** 2 - sq) / (2.0 * two_m)
            t.W[internal] = t.vol[2 * internal] * t.vol[2 * internal + 1] / two_m
    else:
        t.W[K:] = t.N[K:] * (t.N[K:] - 1.0) / 2.0
        t.W[internal] = t.N[2 * internal] * t.N[2 * internal + 1]


def _global_soft(g: Graph, soft: np.ndarray, t: Tree, kernel: Kernel) -> None:
    K, D = t.K, t.depth
    d = g.degree
    leaf_d = g.adjacency @ soft                      # (n, K): d_ia
    dn = aggregate_up(leaf_d, D)                     # d_ir
    nn = aggregate_up(soft, D)                       # n_ir
    t.vol[:] = d @ nn
    t.N[:] = nn.sum(axis=0)
    t.E[:] = 0.0
    t.W[:] = 0.0
    t.E[K:] = 0.5 * np.einsum("ia,ia->a", soft, leaf_d)
    L = 2 * np.arange(1, K)
    R = L + 1
    t.E[1:K] = np.einsum("ir,ir->r", nn[:, L], dn[:, R])
    if kernel.code == POISSON:
        two_m = g.total_degree
        if two_m > 0:
            dm = d[:, None] * soft
            t.W[K:] = np.einsum("ia,ia->a", dm, t.vol[K:][None, :] - dm) / (2.0 * two_m)
            t.W[1:K] = np.einsum("i,ir,ir->r", d, nn[:, L],
                                 t.vol[R][None, :] - d[:, None] * nn[:, R]) / two_m
    else:
        t.W[K:] = 0.5 * np.einsum("ia,ia->a", soft, t.N[K:][None, :] - soft)
        t.W[1:K] = np.einsum("ir,ir->r", nn[:, L], t.N[R][None, :] - nn[:, R])


def global_update(g: Graph, mu: Membership, t: Tree, kernel: Kernel) -> Tree:
    """Recompute every node's statistics and posterior from memberships.

    For node ``r`` the statistics are the sums over unordered vertex pairs
    whose groups meet at ``r``: ``E_r`` of edge weight and ``W_r`` of
    exposure.  They are assembled from per-leaf degree volumes and per-vertex
    subtree totals rather than by enumerating pairs.
    """
    if mu.n != g.n:
        raise ValueError("membership and graph sizes differ")
    if mu.soft is None:
        _global_hard(g, mu.hard, t, kernel)
    else:
        if mu.soft.shape != (g.n, t.K):
            raise ValueError("soft membership must be (n, K)")
        _global_soft(g, mu.soft, t, kernel)
    refresh_posteriors(t, kernel)
    return t


def score_proxy_tree(t: Tree, kernel: Kernel) -> float:
    prior = Prior(t.a0, t.b0)
    E = np.maximum(t.E[1:], 0.0)
    W = np.maximum(t.W[1:], 0.0)
    if kernel.code == BERNOULLI:
        W = np.maximum(W, E)
    return float(np.sum(kernel.log_marginal(prior, E, W)))


def score_proxy(g: Graph, mu: Membership, t: Tree, kernel: Kernel) -> float:
    """Sum of node log marginal likelihoods; higher is better."""
    global_update(g, mu, t, kernel)
    return score_proxy_tree(t, kernel)


# ---------------------------------------------------------------------------
# per-vertex views

def _leaf_edge_mass(g: Graph, mu: Membership, i: int, K: int) -> np.ndarray:
    nb, w = g.neighbors(i)
    if mu.soft is not None:
        return w @ mu.soft[nb] if len(nb) else np.zeros(K)
    return np.bincount(mu.hard[nb] - 1, weights=w, minlength=K).astype(np.float64)


def _leaf_mass(mu: Membership, i: int, K: int) -> np.ndarray:
    if mu.soft is not None:
        return mu.soft[i].astype(np.float64)
    row = np.zeros(K)
    row[mu.hard[i] - 1] = 1.0
    return row


def _contribution(t: Tree, kind: int, di: float, two_m: float, dn: np.ndarray,
                  nn: np.ndarray, vol_ex: np.ndarray, N_ex: np.ndarray):
    """Statistics a vertex adds to each node, given the vertex-free state."""
    K = t.K
    dE = np.zeros(2 * K)
    dW = np.zeros(2 * K)
    dE[K:] = nn[K:] * dn[K:]
    L = 2 * np.arange(1, K)
    R = L + 1
    dE[1:K] = nn[L] * dn[R] + nn[R] * dn[L]
    if kind == POISSON:
        if two_m > 0:
            c = di / two_m
            dW[K:] = c * nn[K:] * vol_ex[K:]
            dW[1:K] = c * (nn[L] * vol_ex[R] + nn[R] * vol_ex[L])
    else:
        dW[K:] = nn[K:] * N_ex[K:]
        dW[1:K] = nn[L] * N_ex[R] + nn[R] * N_ex[L]
    return dE, dW


class VertexView(NamedTuple):
    """Node statistics with one vertex removed, plus that vertex's edge totals."""

    E: np.ndarray
    W: np.ndarray
    vol: np.ndarray
    N: np.ndarray
    dn: np.ndarray
    leaf_d: np.ndarray
    scale: float
    expo: np.ndarray


def exclude_vertex(g: Graph, mu: Membership, t: Tree, kernel: Kernel, i: int) -> VertexView:
    """Node statistics of the current state with vertex ``i`` left out.

    The tree must hold statistics consistent with ``mu`` (e.g. right after
    :func:`global_update`); it is not modified.
    """
    K = t.K
    di = float(g.degree[i])
    two_m = g.total_degree
    leaf_d = _leaf_edge_mass(g, mu, i, K)
    dn = aggregate_up(leaf_d, t.depth)
    nn = aggregate_up(_leaf_mass(mu, i, K), t.depth)
    vol_ex = t.vol - di * nn
    N_ex = t.N - nn
    dE, dW = _contribution(t, kernel.code, di, two_m, dn, nn, vol_ex, N_ex)
    E = t.E - dE
    W = t.W - dW
    if kernel.code == POISSON:
        scale, expo = (di / two_m if two_m > 0 else 0.0), vol_ex
    else:
        scale, expo = 1.0, N_ex
    return VertexView(E, W, vol_ex, N_ex, dn, leaf_d, scale, expo)


def _restriction_root(leaf_d: np.ndarray, current: int, K: int) -> int:
    U = np.flatnonzero(leaf_d > 0)
    lo = min(int(U[0]) + 1, current) if len(U) else current
    hi = max(int(U[-1]) + 1, current) if len(U) else current
    return lca_heap(lo + K - 1, hi + K - 1)


class DeterministicUpdate(NamedTuple):
    label: int
    score: float
    s: SuffStat
    root: int


class ProbabilisticUpdate(NamedTuple):
    mu: np.ndarray
    grad: np.ndarray
    root: int


def local_update_deterministic(i: int, g: Graph, mu: Membership, t: Tree, kernel: Kernel,
                               rule: str = "collapsed", restricted: bool = False,
                               root: int | None = None) -> DeterministicUpdate:
    """Best hard label for vertex ``i`` (the state is left untouched).

    ``score`` is the path-summed score of the winner measured from the
    traversal root; ``s`` the vertex's statistics aggregated at that root.
    """
    view = exclude_vertex(g, mu, t, kernel, i)
    if root is None:
        root = _restriction_root(view.leaf_d, int(mu.hard[i]), t.K) if restricted else 1
    counters = np.zeros(_core.N_COUNTERS, dtype=np.int64)
    M, leaf, e, w = _core.max_grad_path(root, t.depth, view.dn, view.expo, view.scale,
                                        view.E, view.W, kernel.code, rule_code(rule),
                                        t.a0, t.b0, counters)
    return DeterministicUpdate(int(leaf) - t.K + 1, float(M), SuffStat(float(e), float(w)), root)


def grad_path(root: int, t: Tree, kernel: Kernel, rule: str, dn: np.ndarray,
              expo: np.ndarray, scale: float, E: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Path-summed scores for every leaf under ``root`` (two tree passes).

    The first pass scores, at each internal node, each branch against the
    statistics of its sibling; the second pushes prefix sums down to the
    leaves.  Returns a vector over the leaves of the subtree, left to right.
    """
    prior = Prior(t.a0, t.b0)
    h = t.depth - (root.bit_length() - 1)
    acc = np.zeros(1)
    for lvl in range(h):
        idx = (root << lvl) + np.arange(1 << lvl)
        lc, rc = 2 * idx, 2 * idx + 1
        alpha, beta = _posterior(kernel, prior, E[idx], W[idx])
        to_left = kernel.log_score(rule, alpha, beta, SuffStat(dn[rc], scale * expo[rc]))
        to_right = kernel.log_score(rule, alpha, beta, SuffStat(dn[lc], scale * expo[lc]))
        nxt = np.empty(2 * len(acc))
        nxt[0::2] = acc + to_left
        nxt[1::2] = acc + to_right
        acc = nxt
    leaves = (root << h) + np.arange(1 << h)
    alpha, beta = _posterior(kernel, prior, E[leaves], W[leaves])
    return acc + kernel.log_score(rule, alpha, beta, SuffStat(dn[leaves], scale * expo[leaves]))


def _posterior(kernel, prior, E, W):
    E = np.maximum(E, 0.0)
    W = np.maximum(W, 0.0)
    if kernel.code == BERNOULLI:
        W = np.maximum(W, E)
    return kernel.posterior_update(prior, E, W)


def _softmax_row(grad: np.ndarray, root: int, t: Tree) -> np.ndarray:
    lo, hi = t.leaf_range(root)
    row = np.zeros(t.K)
    z = grad - grad.max()
    p = np.exp(z)
    row[lo - 1:hi - 1] = p / p.sum()
    return row


def local_update_probabilistic(i: int, g: Graph, mu: Membership, t: Tree, kernel: Kernel,
                               rule: str = "collapsed", restricted: bool = False,
                               root: int | None = None) -> ProbabilisticUpdate:
    """Soft membership row for vertex ``i`` (the state is left untouched).

    ``grad`` has one entry per leaf; leaves outside the traversal root are
    ``-inf`` and receive zero probability.
    """
    view = exclude_vertex(g, mu, t, kernel, i)
    if root is None:
        root = _restriction_root(view.leaf_d, int(mu.hard[i]), t.K) if restricted else 1
    sub = grad_path(root, t, kernel, rule, view.dn, view.expo, view.scale, view.E, view.W)
    grad = np.full(t.K, -np.inf)
    lo, hi = t.leaf_range(root)
    grad[lo - 1:hi - 1] = sub
    return ProbabilisticUpdate(_softmax_row(sub, root, t), grad, root)


# ---------------------------------------------------------------------------
# sweeps

class _DeterministicRunner:
    """Hard-assignment sweeps driven by the compiled kernel."""

    def __init__(self, g: Graph, t: Tree, kernel: Kernel, rule: str, restricted: bool):
        self.g, self.t, self.kernel = g, t, kernel
        self.rule = rule_code(rule)
        self.restricted = bool(restricted)
        self.dsub = np.zeros(2 * t.K)
        deg_nnz = int(np.diff(g.indptr).max()) if g.n else 0
        self.touched = np.zeros(max(1, min(2 * t.K, deg_nnz * (t.depth + 1))), dtype=np.int64)
        self.counters = np.zeros(_core.N_COUNTERS, dtype=np.int64)

    def sweep(self, labels_heap: np.ndarray, order: np.ndarray) -> int:
        g, t = self.g, self.t
        return int(_core.sweep_deterministic(
            order, g.indptr, g.indices, g.weights, g.degree, g.total_degree, labels_heap,
            t.E, t.W, t.vol, t.N, t.depth, self.kernel.code, self.rule, t.a0, t.b0,
            self.restricted, self.dsub, self.touched, self.counters))


def _probabilistic_sweep(g: Graph, mu: Membership, t: Tree, kernel: Kernel, rule: str,
                         restricted: bool, order: np.ndarray) -> tuple[int, float]:
    """One in-place pass of soft updates; returns (argmax changes, max |delta mu|)."""
    K, D = t.K, t.depth
    two_m = g.total_degree
    soft = mu.soft
    moved = 0
    max_delta = 0.0
    for i in order.tolist():
        di = float(g.degree[i])
        leaf_d = _leaf_edge_mass(g, mu, i, K)
        dn = aggregate_up(leaf_d, D)
        old = soft[i].copy()
        nn = aggregate_up(old, D)
        vol_ex = t.vol - di * nn
        N_ex = t.N - nn
        dE, dW = _contribution(t, kernel.code, di, two_m, dn, nn, vol_ex, N_ex)
        t.E -= dE
        t.W -= dW
        t.vol[:] = vol_ex
        t.N[:] = N_ex
        cur = int(mu.hard[i])
        root = _restriction_root(leaf_d, cur, K) if restricted else 1
        if kernel.code == POISSON:
            scale, expo = (di / two_m if two_m > 0 else 0.0), t.vol
        else:
            scale, expo = 1.0, t.N
        sub = grad_path(root, t, kernel, rule, dn, expo, scale, t.E, t.W)
        row = _softmax_row(sub, root, t)
        nn = aggregate_up(row, D)
        dE, dW = _contribution(t, kernel.code, di, two_m, dn, nn, t.vol, t.N)
        t.E += dE
        t.W += dW
        t.vol += di * nn
        t.N += nn
        soft[i] = row
        new = int(np.argmax(row)) + 1
        if new != cur:
            moved += 1
            mu.hard[i] = new
        max_delta = max(max_delta, float(np.max(np.abs(row - old))))
    return moved, max_delta


def _sweep_order(n: int, cfg: FitConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.sweep_order == "shuffled":
        return rng.permutation(n).astype(np.int64)
    return np.arange(n, dtype=np.int64)


def run_deterministic(g: Graph, mu: Membership, t: Tree, kernel: Kernel, rule: str,
                      restricted: bool, max_sweeps: int, order_rng: np.random.Generator | None = None,
                      sweep_order: str = "ascending", trace: list | None = None,
                      counters: np.ndarray | None = None) -> bool:
    """Hard sweeps until no vertex moves; updates ``mu`` and ``t`` in place."""
    runner = _DeterministicRunner(g, t, kernel, rule, restricted)
    labels_heap = mu.hard.astype(np.int64) + t.K - 1
    converged = False
    for sweep in range(1, max_sweeps + 1):
        t0 = time.perf_counter()
        global_update(g, Membership(labels_heap - t.K + 1), t, kernel)
        if sweep_order == "shuffled":
            order = order_rng.permutation(g.n).astype(np.int64)
        else:
            order = np.arange(g.n, dtype=np.int64)
        moved = runner.sweep(labels_heap, order)
        if trace is not None:
            refresh_posteriors(t, kernel)
            trace.append(TraceRow(sweep, moved, score_proxy_tree(t, kernel),
                                  1000.0 * (time.perf_counter() - t0)))
        log.debug("sweep %d: moved %d", sweep, moved)
        if moved == 0:
            converged = True
            break
    mu.hard[:] = labels_heap - t.K + 1
    mu.soft = None
    global_update(g, mu, t, kernel)
    if counters is not None:
        counters += runner.counters
    return converged


def run_probabilistic(g: Graph, mu: Membership, t: Tree, kernel: Kernel, rule: str,
                      restricted: bool, max_sweeps: int, tol: float,
                      order_rng: np.random.Generator | None = None,
                      sweep_order: str = "ascending", trace: list | None = None) -> bool:
    if mu.soft is None:
        mu.soft = mu.dense(t.K).copy()
    converged = False
    for sweep in range(1, max_sweeps + 1):
        t0 = time.perf_counter()
        global_update(g, mu, t, kernel)
        if sweep_order == "shuffled":
            order = order_rng.permutation(g.n).astype(np.int64)
        else:
            order = np.arange(g.n, dtype=np.int64)
        moved, delta = _probabilistic_sweep(g, mu, t, kernel, rule, restricted, order)
        if trace is not None:
            refresh_posteriors(t, kernel)
            trace.append(TraceRow(sweep, moved, score_proxy_tree(t, kernel),
                                  1000.0 * (time.perf_counter() - t0)))
        if delta < tol:
            converged = True
            break
    global_update(g, mu, t, kernel)
    return converged


# ---------------------------------------------------------------------------
# full fit

def _validate_graph(g: Graph, kernel: Kernel) -> None:
    if kernel.code == BERNOULLI and not g.is_binary():
        raise ValueError("the hsb model needs 0/1 edge weights")


def fit(g: Graph, cfg: FitConfig | None = None) -> FitResult:
    """Initialise, alternate global and local updates, then prune the tree."""
    from .initprune import bisect_init, prune

    cfg = cfg or FitConfig()
    if g.n == 0:
        raise ValueError("cannot fit an empty graph")
    kernel = get_kernel(cfg.model)
    _validate_graph(g, kernel)
    depth = cfg.resolve_depth(g.n)
    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "bisect":
        mu = bisect_init(g, depth, cfg)
    else:
        mu = Membership(rng.integers(1, (1 << depth) + 1, size=g.n).astype(np.int64))
    t = Tree(depth, cfg.a0, cfg.b0)
    trace: list[TraceRow] = []
    counters = np.zeros(_core.N_COUNTERS, dtype=np.int64)
    if cfg.update_mode == "deterministic":
        converged = run_deterministic(g, mu, t, kernel, cfg.local_rule, cfg.restricted,
                                      cfg.max_sweeps, rng, cfg.sweep_order, trace, counters)
    else:
        converged = run_probabilistic(g, mu, t, kernel, cfg.local_rule, cfg.restricted,
                                      cfg.max_sweeps, cfg.tol, rng, cfg.sweep_order, trace)
    global_update(g, mu, t, kernel)
    occupied = np.bincount(mu.hard - 1, minlength=t.K) > 0
    pruned = prune(t, kernel, cfg.prune_threshold, occupied=occupied)
    names = ("vertices", "neighbors", "touched", "visited")
    return FitResult(mu, t, pruned, trace, converged, cfg,
                     counters={k: int(v) for k, v in zip(names, counters)})


# ---------------------------------------------------------------------------
# output formats

def write_membership(result: FitResult, names, stream: IO[str], min_prob: float = 1e-6) -> None:
    """``vertex<TAB>group<TAB>probability``; soft rows emit one line per group."""
    if result.membership.soft is None:
        for name, gr in zip(names, result.groups.tolist()):
            stream.write(f"{name}\t{gr}\t1\n")
        return
    probs = result.group_probabilities()
    for name, row in zip(names, probs):
        for gidx in np.flatnonzero(row >= min_prob):
            stream.write(f"{name}\t{gidx + 1}\t{format(row[gidx], '.12g')}\n")


def read_membership(stream: IO[str]) -> dict[str, int]:
    """Most probable group per vertex name.

    Also accepts plain ``vertex<TAB>group`` partitions (probability 1).
    """
    best: dict[str, tuple[float, int]] = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise ValueError(f"line {lineno}: expected vertex<TAB>group[<TAB>probability]")
        name, grp = parts[0], parts[1]
        p = float(parts[2]) if len(parts) == 3 else 1.0
        if name not in best or p > best[name][0]:
            best[name] = (p, int(grp))
    return {k: v[1] for k, v in best.items()}


def write_trace(trace: list[TraceRow], stream: IO[str]) -> None:
    for row in trace:
        stream.write(f"{row.sweep}\t{row.moved}\t{float(row.score)!r}\t{row.millis:.3f}\n")
