"""Complete binary dendrogram over K = 2**depth leaf groups.

Nodes use heap numbering: the root is 1, the children of ``r`` are ``2r``
and ``2r + 1``, and leaf label ``a`` (1-based) lives at heap index
``a + K - 1``.  Per-node state is kept in flat arrays indexed by heap index
(slot 0 unused), so the nodes at one depth form a contiguous slice.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

MAX_DEPTH = 20


def aggregate_up(values: np.ndarray, depth: int) -> np.ndarray:
    """Lift leaf values (last axis of length K) to every heap node by summing children.

    Returns an array whose last axis has length 2K; entry ``r`` holds the
    total over the leaves below node ``r``.
    """
    K = 1 << depth
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] != K:
        raise ValueError(f"expected {K} leaf values, got {values.shape[-1]}")
    out = np.zeros(values.shape[:-1] + (2 * K,), dtype=np.float64)
    out[..., K:] = values
    for lvl in range(depth - 1, -1, -1):
        lo, hi = 1 << lvl, 1 << (lvl + 1)
        out[..., lo:hi] = out[..., 2 * lo:2 * hi:2] + out[..., 2 * lo + 1:2 * hi:2]
    return out


def lca_heap(x: int, y: int) -> int:
    """LCA of two heap indices (the deeper one is shifted up first)."""
    bx, by = x.bit_length(), y.bit_length()
    if bx > by:
        x >>= bx - by
    elif by > bx:
        y >>= by - bx
    while x != y:
        x >>= 1
        y >>= 1
    return x


def node_depth(r: int) -> int:
    return r.bit_length() - 1


@dataclass
class VertexTreeStats:
    """Per-node totals for one vertex: edge weight ``d`` and membership mass ``n``."""

    d: np.ndarray
    n: np.ndarray


class Tree:
    """Fixed-depth dendrogram holding conjugate posterior state per node.

    ``E`` and ``W`` are the accumulated edge and exposure statistics of the
    pairs whose lowest common ancestor is the node; ``vol`` and ``N`` are the
    degree volume and membership mass below the node.  ``alpha``/``beta``
    are the posterior parameters and are refreshed by the kernel.
    """

    def __init__(self, depth: int, a0: float = 1.0, b0: float = 1.0):
        if not isinstance(depth, (int, np.integer)) or not 1 <= depth <= MAX_DEPTH:
            raise ValueError(f"depth must be an integer in [1, {MAX_DEPTH}], got {depth!r}")
        if a0 <= 0 or b0 <= 0:
            raise ValueError("prior parameters must be positive")
        self.depth = int(depth)
        self.K = 1 << self.depth
        self.a0 = float(a0)
        self.b0 = float(b0)
        size = 2 * self.K
        self.E = np.zeros(size)
        self.W = np.zeros(size)
        self.vol = np.zeros(size)
        self.N = np.zeros(size)
        self.alpha = np.full(size, self.a0)
        self.beta = np.full(size, self.b0)
        self.alpha[0] = self.beta[0] = np.nan

    @property
    def num_nodes(self) -> int:
        return 2 * self.K - 1

    def nodes(self) -> range:
        return range(1, 2 * self.K)

    def internal_nodes(self) -> range:
        return range(1, self.K)

    def is_leaf(self, r: int) -> bool:
        return r >= self.K

    def _check_label(self, a: int) -> None:
        if not 1 <= a <= self.K:
            raise ValueError(f"leaf label {a} outside [1, {self.K}]")

    def leaf(self, a: int) -> int:
        """Heap index of leaf label ``a``."""
        self._check_label(a)
        return a + self.K - 1

    def label(self, r: int) -> int:
        """Leaf label of heap index ``r`` (must be a leaf)."""
        if not self.K <= r < 2 * self.K:
            raise ValueError(f"heap index {r} is not a leaf")
        return r - self.K + 1

    def leaf_range(self, r: int) -> tuple[int, int]:
        """Half-open range of leaf labels under node ``r``."""
        shift = self.depth - node_depth(r)
        first = (r << shift) - self.K + 1
        return first, first + (1 << shift)

    def lca(self, a: int, b: int) -> int:
        return lca_heap(self.leaf(a), self.leaf(b))

    def path_to_root(self, a: int) -> list[int]:
        r = self.leaf(a)
        path = []
        while r >= 1:
            path.append(r)
            r >>= 1
        return path

    def restriction_root(self, U: Iterable[int], current: int) -> int:
        """Smallest subtree covering the groups in ``U`` and ``current``."""
        labels = set(U)
        labels.add(current)
        return self.lca(min(labels), max(labels))

    def accumulate_vertex_stats(self, leaf_d, leaf_n) -> VertexTreeStats:
        leaf_d = np.asarray(leaf_d, dtype=np.float64)
        leaf_n = np.asarray(leaf_n, dtype=np.float64)
        if leaf_d.shape != (self.K,) or leaf_n.shape != (self.K,):
            raise ValueError(f"leaf vectors must have length {self.K}")
        return VertexTreeStats(aggregate_up(leaf_d, self.depth),
                               aggregate_up(leaf_n, self.depth))

    def reset(self) -> None:
        for arr in (self.E, self.W, self.vol, self.N):
            arr[:] = 0.0
        self.alpha[1:] = self.a0
        self.beta[1:] = self.b0

    def copy(self) -> "Tree":
        t = Tree(self.depth, self.a0, self.b0)
        for name in ("E", "W", "vol", "N", "alpha", "beta"):
            getattr(t, name)[:] = getattr(self, name)
        return t

    def dump(self, stream: IO[str]) -> None:
        for r in self.nodes():
            vals = (self.alpha[r], self.beta[r], self.E[r], self.W[r], self.vol[r])
            stream.write(f"{r}\t" + "\t".join(repr(float(v)) for v in vals) + "\n")


def load_tree_dump(stream: IO[str]) -> np.ndarray:
    """Parse a tree dump into an array of rows (heap, alpha, beta, E, W, vol)."""
    rows = [tuple(float(x) for x in line.split("\t")) for line in stream if line.strip()]
    return np.array(rows).reshape(-1, 6)


def build(depth: int, a0: float = 1.0, b0: float = 1.0) -> Tree:
    return Tree(depth, a0, b0)
