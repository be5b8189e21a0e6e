"""Sparse undirected weighted graphs, edge-list I/O and dataset preparation.

Graphs are stored in compressed sparse row form with both directions of
every edge present, sorted neighbour lists and no self-loops.  A graph is
never mutated after construction; derived graphs (induced subgraphs,
training graphs) are new objects.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

VERTEX_PRAGMA = "#@vertex"


class EdgeListError(ValueError):
    """Raised for a malformed edge-list line."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph in CSR form.

    ``indptr``/``indices``/``weights`` hold both directions of each edge.
    ``degree[i]`` is the weighted degree and ``total_degree`` equals 2m.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    degree: np.ndarray
    total_degree: float
    vertex_names: tuple[str, ...]
    self_loops_dropped: int = 0

    @classmethod
    def from_edges(cls, n: int, src: Sequence[int], dst: Sequence[int],
                   weights: Sequence[float] | None = None,
                   names: Sequence[str] | None = None) -> "Graph":
        """Build a graph from an (unordered) edge list.

        Duplicate pairs are merged by summing weights; self-loops are dropped.
        """
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if weights is None:
            w = np.ones(len(src), dtype=np.float64)
        else:
            w = np.asarray(weights, dtype=np.float64).ravel()
        if not (len(src) == len(dst) == len(w)):
            raise ValueError("src, dst and weights must have equal length")
        if len(src) and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError("vertex index out of range")
        if np.any(w < 0):
            raise ValueError("edge weights must be nonnegative")
        loops = src == dst
        n_loops = int(loops.sum())
        keep = ~loops
        src, dst, w = src[keep], dst[keep], w[keep]
        rows = np.concatenate([src, dst])
        cols = np.concatenate([dst, src])
        vals = np.concatenate([w, w])
        # coo -> csr sums duplicates and sorts column indices
        adj = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        adj.sum_duplicates()
        adj.sort_indices()
        if names is None:
            names = [str(i) for i in range(n)]
        if len(names) != n:
            raise ValueError("names must have one entry per vertex")
        degree = np.asarray(adj.sum(axis=1)).ravel().astype(np.float64)
        return cls(
            n=n,
            indptr=adj.indptr.astype(np.int64),
            indices=adj.indices.astype(np.int64),
            weights=adj.data.astype(np.float64),
            degree=degree,
            total_degree=float(degree.sum()),
            vertex_names=tuple(str(s) for s in names),
            self_loops_dropped=n_loops,
        )

    @property
    def num_edges(self) -> int:
        """Number of stored undirected edges (nonzero upper-triangle entries)."""
        return len(self.indices) // 2

    @property
    def adjacency(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.weights, self.indices, self.indptr),
                             shape=(self.n, self.n))

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    @cached_property
    def _upper(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        mask = src < self.indices
        out = (src[mask], self.indices[mask], self.weights[mask])
        for a in out:
            a.flags.writeable = False
        return out

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Upper-triangle edges as ``(src, dst, weight)`` with src < dst (read-only)."""
        return self._upper

    def has_edge(self, i: int, j: int) -> bool:
        nb, _ = self.neighbors(i)
        k = np.searchsorted(nb, j)
        return bool(k < len(nb) and nb[k] == j)

    def subgraph(self, vertices: Sequence[int]) -> "Graph":
        """Induced subgraph on ``vertices`` (new indices follow the given order)."""
        vertices = np.asarray(vertices, dtype=np.int64)
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[vertices] = np.arange(len(vertices))
        src, dst, w = self.edges()
        keep = (remap[src] >= 0) & (remap[dst] >= 0)
        names = [self.vertex_names[v] for v in vertices]
        return Graph.from_edges(len(vertices), remap[src[keep]], remap[dst[keep]],
                                w[keep], names)

    def is_binary(self) -> bool:
        return bool(np.all(self.weights == 1.0))

    def same_as(self, other: "Graph") -> bool:
        return (self.n == other.n
                and self.vertex_names == other.vertex_names
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.degree, other.degree)
                and self.total_degree == other.total_degree)


def rho(g: Graph, i: int, j: int) -> float:
    """Degree-product exposure d_i d_j / 2m of the pair (i, j)."""
    if i == j:
        raise ValueError("rho is defined for distinct vertices only")
    if g.total_degree == 0:
        return 0.0
    return float(g.degree[i] * g.degree[j] / g.total_degree)


# ---------------------------------------------------------------------------
# edge-list I/O

def load_edge_list(stream: IO[str] | Iterable[str]) -> Graph:
    """Parse ``src dst [weight]`` lines; ``#`` lines are comments.

    Vertices are indexed in order of first appearance.  ``#@vertex NAME``
    lines declare a vertex explicitly (used to round-trip isolated vertices
    and index order).
    """
    index: dict[str, int] = {}
    src: list[int] = []
    dst: list[int] = []
    wts: list[float] = []

    def vid(name: str) -> int:
        k = index.get(name)
        if k is None:
            k = index[name] = len(index)
        return k

    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith(VERTEX_PRAGMA):
                parts = line.split()
                if len(parts) != 2:
                    raise EdgeListError(lineno, "vertex declaration needs exactly one name")
                vid(parts[1])
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise EdgeListError(lineno, f"expected 2 or 3 fields, got {len(parts)}")
        w = 1.0
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise EdgeListError(lineno, f"non-numeric weight {parts[2]!r}") from None
            if not math.isfinite(w) or w < 0:
                raise EdgeListError(lineno, f"invalid weight {parts[2]!r}")
        src.append(vid(parts[0]))
        dst.append(vid(parts[1]))
        wts.append(w)

    names = list(index)
    g = Graph.from_edges(len(names), src, dst, wts, names)
    if g.self_loops_dropped:
        log.warning("dropped %d self-loop(s)", g.self_loops_dropped)
    return g


def save_edge_list(g: Graph, stream: IO[str]) -> None:
    for name in g.vertex_names:
        stream.write(f"{VERTEX_PRAGMA} {name}\n")
    src, dst, w = g.edges()
    names = g.vertex_names
    for a, b, x in zip(src.tolist(), dst.tolist(), w.tolist()):
        stream.write(f"{names[a]}\t{names[b]}\t{format(x, '.17g')}\n")


def read_graph(path: str) -> Graph:
    with open(path) as fh:
        return load_edge_list(fh)


def write_graph(g: Graph, path: str) -> None:
    with open(path, "w") as fh:
        save_edge_list(g, fh)


# ---------------------------------------------------------------------------
# dataset preparation

def prune_low_degree(g: Graph, min_degree: float = 3) -> tuple[Graph, np.ndarray]:
    """Iteratively drop vertices whose degree is below ``min_degree``.

    Returns the induced subgraph and an old->new index map (-1 for removed
    vertices).  The result may be empty.
    """
    if min_degree < 0:
        raise ValueError("min_degree must be nonnegative")
    deg = g.degree.copy()
    alive = np.ones(g.n, dtype=bool)
    stack = [i for i in range(g.n) if deg[i] < min_degree]
    for i in stack:
        alive[i] = False
    while stack:
        i = stack.pop()
        nb, w = g.neighbors(i)
        for j, x in zip(nb.tolist(), w.tolist()):
            if alive[j]:
                deg[j] -= x
                if deg[j] < min_degree:
                    alive[j] = False
                    stack.append(j)
    kept = np.flatnonzero(alive)
    mapping = np.full(g.n, -1, dtype=np.int64)
    mapping[kept] = np.arange(len(kept))
    out = g.subgraph(kept)
    if out.n == 0:
        log.warning("low-degree pruning removed every vertex")
    return out, mapping


@dataclass
class PairSample:
    """Held-out vertex pairs with link (1) / non-link (0) labels, i < j."""

    i: np.ndarray
    j: np.ndarray
    label: np.ndarray
    source_fraction: float = 0.0

    def __len__(self) -> int:
        return len(self.i)

    @property
    def n_links(self) -> int:
        return int(self.label.sum())

    @property
    def n_nonlinks(self) -> int:
        return len(self) - self.n_links


def _sample_nonedges(g: Graph, count: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    n = g.n
    total_pairs = n * (n - 1) // 2
    available = total_pairs - g.num_edges
    count = min(count, available)
    if count <= 0:
        return []
    if total_pairs <= 2_000_000 or count > available // 4:
        iu, ju = np.triu_indices(n, k=1)
        A = g.adjacency
        is_edge = np.asarray(A[iu, ju]).ravel() != 0
        cand = np.flatnonzero(~is_edge)
        pick = np.sort(rng.choice(len(cand), size=count, replace=False))
        return list(zip(iu[cand[pick]].tolist(), ju[cand[pick]].tolist()))
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < count:
        a = rng.integers(0, n, size=2 * (count - len(chosen)) + 8)
        b = rng.integers(0, n, size=len(a))
        for x, y in zip(a.tolist(), b.tolist()):
            if x == y:
                continue
            if x > y:
                x, y = y, x
            if (x, y) in chosen or g.has_edge(x, y):
                continue
            chosen.add((x, y))
            if len(chosen) == count:
                break
    return sorted(chosen)


def hold_out_split(g: Graph, fraction: float, nonlink_count_policy: str = "equal",
                   seed: int = 0) -> tuple[Graph, PairSample]:
    """Remove ``floor(fraction * m)`` edges uniformly and sample non-edges.

    ``equal`` draws as many non-edges as removed links; ``preserve_ratio``
    draws ``round(removed * nonedges / edges)`` so the held-out set keeps the
    original graph's link/non-link ratio.  Requests beyond the number of
    available non-edges are capped.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    if nonlink_count_policy not in ("equal", "preserve_ratio"):
        raise ValueError(f"unknown policy {nonlink_count_policy!r}")
    rng = np.random.default_rng(seed)
    src, dst, w = g.edges()
    m = len(src)
    k = int(math.floor(fraction * m))
    removed = np.sort(rng.choice(m, size=k, replace=False)) if k else np.empty(0, np.int64)
    keep = np.ones(m, dtype=bool)
    keep[removed] = False
    train = Graph.from_edges(g.n, src[keep], dst[keep], w[keep], g.vertex_names)

    n_pairs = g.n * (g.n - 1) // 2
    nonedges = n_pairs - m
    if nonlink_count_policy == "equal":
        want = k
    else:
        want = int(round(k * nonedges / m)) if m else 0
    if want > nonedges:
        log.warning("requested %d non-links but only %d exist; capping", want, nonedges)
        want = nonedges
    neg = _sample_nonedges(g, want, rng)

    pi = np.concatenate([src[removed], np.array([p[0] for p in neg], dtype=np.int64)])
    pj = np.concatenate([dst[removed], np.array([p[1] for p in neg], dtype=np.int64)])
    lab = np.concatenate([np.ones(k, dtype=np.int64), np.zeros(len(neg), dtype=np.int64)])
    return train, PairSample(pi, pj, lab, source_fraction=fraction)


def write_pairs(pairs: PairSample, path: str) -> None:
    with open(path, "w") as fh:
        for a, b, c in zip(pairs.i.tolist(), pairs.j.tolist(), pairs.label.tolist()):
            fh.write(f"{a}\t{b}\t{c}\n")


def read_pairs(path: str) -> PairSample:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise EdgeListError(lineno, "expected i<TAB>j<TAB>{0|1}")
            a, b = int(parts[0]), int(parts[1])
            rows.append((min(a, b), max(a, b), int(parts[2])))
    arr = np.array(rows, dtype=np.int64).reshape(-1, 3)
    return PairSample(arr[:, 0], arr[:, 1], arr[:, 2])
