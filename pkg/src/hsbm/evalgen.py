"""Benchmark graphs and evaluation metrics.

``generate_planted`` draws a degree-corrected planted partition (Chung-Lu
edge probabilities inside and across groups) as a stand-in for LFR-style
benchmarks.  Metrics: partition NMI, group-frequency link scores and
average precision.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np
from scipy.optimize import brentq

from .graph import Graph, PairSample

log = logging.getLogger(__name__)


class InfeasibleConfig(ValueError):
    pass


@dataclass
class GenConfig:
    n: int = 1000
    k: int | None = 10
    s_min: int | None = None
    s_max: int | None = None
    mixing: float = 0.1
    d_avg: float = 10.0
    d_max: float = 100.0
    gamma: float = 2.5
    seed: int = 0

    def validate(self) -> None:
        if self.n < 1:
            raise InfeasibleConfig("n must be positive")
        if not 0 <= self.mixing < 1:
            raise InfeasibleConfig("mixing must lie in [0, 1)")
        if not 0 < self.d_avg <= self.d_max:
            raise InfeasibleConfig("need 0 < d_avg <= d_max")
        if self.gamma <= 1:
            raise InfeasibleConfig("power-law exponent must exceed 1")
        if self.k is None:
            if self.s_min is None or self.s_max is None:
                raise InfeasibleConfig("give either k or both s_min and s_max")
        elif self.k < 1 or self.k > self.n:
            raise InfeasibleConfig("k must lie in [1, n]")
        if self.s_min is not None and self.s_max is not None:
            if not 1 <= self.s_min <= self.s_max:
                raise InfeasibleConfig("need 1 <= s_min <= s_max")
        s_min = self.s_min or 1
        if self.k is not None and s_min * self.k > self.n:
            raise InfeasibleConfig(f"s_min * k = {s_min * self.k} exceeds n = {self.n}")
        if self.k is None and s_min > self.n:
            raise InfeasibleConfig("s_min exceeds n")


def _group_sizes(cfg: GenConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.k is not None:
        base, extra = divmod(cfg.n, cfg.k)
        sizes = np.full(cfg.k, base, dtype=np.int64)
        sizes[:extra] += 1
        return sizes
    sizes: list[int] = []
    rem = cfg.n
    while rem > 0:
        if rem <= cfg.s_max:
            sizes.append(rem)
            break
        hi = min(cfg.s_max, rem - cfg.s_min)
        s = int(rng.integers(cfg.s_min, hi + 1)) if hi >= cfg.s_min else rem
        sizes.append(s)
        rem -= s
    if len(sizes) > 1 and sizes[-1] < cfg.s_min:
        sizes[-2] += sizes.pop()
    return np.array(sizes, dtype=np.int64)


def _powerlaw_mean(xmin: float, xmax: float, g: float) -> float:
    if abs(g - 2.0) < 1e-12:
        return np.log(xmax / xmin) / (1.0 / xmin - 1.0 / xmax)
    num = (xmax ** (2 - g) - xmin ** (2 - g)) / (2 - g)
    den = (xmax ** (1 - g) - xmin ** (1 - g)) / (1 - g)
    return num / den


def sample_degrees(n: int, d_avg: float, d_max: float, gamma: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Continuous power law on [x_min, d_max] with x_min tuned to the mean."""
    if d_avg >= d_max:
        return np.full(n, float(d_max))
    xmin = brentq(lambda x: _powerlaw_mean(x, d_max, gamma) - d_avg, 1e-6, d_avg)
    u = rng.random(n)
    a, b = xmin ** (1 - gamma), d_max ** (1 - gamma)
    return (a + u * (b - a)) ** (1.0 / (1 - gamma))


def _sample_block(rng, ti, tj, c, same, chunk=1 << 22):
    """Independent Bernoulli edges with p = min(1, c * ti * tj)."""
    out_i, out_j = [], []
    rows = max(1, chunk // max(1, len(tj)))
    for start in range(0, len(ti), rows):
        blk = ti[start:start + rows]
        p = np.minimum(1.0, c * np.outer(blk, tj))
        hit = rng.random(p.shape) < p
        if same:
            r = np.arange(start, start + len(blk))[:, None]
            hit &= r < np.arange(len(tj))[None, :]
        a, b = np.nonzero(hit)
        out_i.append(a + start)
        out_j.append(b)
    return np.concatenate(out_i), np.concatenate(out_j)


def generate_planted(cfg: GenConfig) -> tuple[Graph, np.ndarray]:
    """Degree-corrected planted partition; returns the graph and 1-based labels.

    A vertex of target degree ``theta`` expects ``(1 - mixing) * theta``
    edges inside its group and ``mixing * theta`` edges to other groups.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    sizes = _group_sizes(cfg, rng)
    labels = np.repeat(np.arange(1, len(sizes) + 1), sizes)
    theta = sample_degrees(cfg.n, cfg.d_avg, cfg.d_max, cfg.gamma, rng)
    members = [np.flatnonzero(labels == a + 1) for a in range(len(sizes))]
    S_a = np.array([theta[m].sum() for m in members])
    S = S_a.sum()
    C = (S * S - np.sum(S_a ** 2)) / S if len(sizes) > 1 else np.inf
    src, dst = [], []
    for a, ma in enumerate(members):
        if cfg.mixing < 1:
            i, j = _sample_block(rng, theta[ma], theta[ma], (1 - cfg.mixing) / S_a[a], True)
            src.append(ma[i])
            dst.append(ma[j])
        if cfg.mixing > 0:
            for b in range(a + 1, len(members)):
                mb = members[b]
                i, j = _sample_block(rng, theta[ma], theta[mb], cfg.mixing / C, False)
                src.append(ma[i])
                dst.append(mb[j])
    src = np.concatenate(src) if src else np.empty(0, np.int64)
    dst = np.concatenate(dst) if dst else np.empty(0, np.int64)
    g = Graph.from_edges(cfg.n, src, dst)
    return g, labels


# ---------------------------------------------------------------------------
# partitions

def contiguous(labels: Sequence) -> np.ndarray:
    """Relabel to 1..G in order of first appearance."""
    _, first, inv = np.unique(np.asarray(labels), return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv].astype(np.int64) + 1


def nmi(p: Sequence, q: Sequence) -> float:
    """Normalised mutual information 2 I(p; q) / (H(p) + H(q)).

    Two single-group partitions score 1; if exactly one partition has zero
    entropy the score is 0.
    """
    p = np.asarray(p)
    q = np.asarray(q)
    if p.shape != q.shape:
        raise ValueError("partitions must cover the same vertices")
    n = len(p)
    if n == 0:
        return 1.0
    _, pi = np.unique(p, return_inverse=True)
    _, qi = np.unique(q, return_inverse=True)
    table = np.zeros((pi.max() + 1, qi.max() + 1))
    np.add.at(table, (pi, qi), 1.0)
    pxy = table / n
    px = pxy.sum(axis=1)
    py = pxy.sum(axis=0)
    hp = -np.sum(px * np.log(px))
    hq = -np.sum(py * np.log(py))
    if hp == 0 and hq == 0:
        return 1.0
    if hp == 0 or hq == 0:
        return 0.0
    nz = pxy > 0
    mi = np.sum(pxy[nz] * np.log(pxy[nz] / np.outer(px, py)[nz]))
    return float(min(1.0, max(0.0, 2.0 * mi / (hp + hq))))


def write_partition(names: Sequence[str], labels: Sequence[int], stream: IO[str]) -> None:
    for name, lab in zip(names, labels):
        stream.write(f"{name}\t{int(lab)}\n")


def read_partition(stream: IO[str]) -> dict[str, int]:
    out = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise ValueError(f"line {lineno}: expected vertex<TAB>group")
        out[parts[0]] = int(parts[1])
    return out


# ---------------------------------------------------------------------------
# link prediction

def theta_hat_scores(g_train: Graph, labels: Sequence[int], pairs: PairSample) -> np.ndarray:
    """Score each pair by the observed link frequency between its groups.

    Frequencies count training edges between groups ``a`` and ``b`` over the
    number of possible pairs (``n_a (n_a - 1) / 2`` within a group,
    ``n_a n_b`` across).
    """
    lab = contiguous(labels) - 1
    G = int(lab.max()) + 1 if len(lab) else 0
    sizes = np.bincount(lab, minlength=G).astype(np.float64)
    src, dst, _ = g_train.edges()
    a, b = lab[src], lab[dst]
    links = np.zeros((G, G))
    np.add.at(links, (np.minimum(a, b), np.maximum(a, b)), 1.0)
    links = links + np.triu(links, 1).T
    possible = np.outer(sizes, sizes)
    np.fill_diagonal(possible, sizes * (sizes - 1) / 2.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.where(possible > 0, links / possible, 0.0)
    return theta[lab[pairs.i], lab[pairs.j]]


def _tie_blocks(scores: np.ndarray, labels: np.ndarray):
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    bounds = np.flatnonzero(np.diff(s) != 0) + 1
    ends = np.append(bounds, len(s))
    tp = np.cumsum(y)[ends - 1]
    pos_in_block = np.diff(np.concatenate([[0], tp]))
    return ends, tp, pos_in_block


def auprc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Average precision with tied scores handled as one block."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    P = int(labels.sum())
    if P == 0:
        raise ValueError("average precision needs at least one positive")
    ends, tp, pos_in_block = _tie_blocks(scores, labels)
    precision = tp / ends
    return float(np.sum(pos_in_block * precision) / P)


def pr_curve(scores: Sequence[float], labels: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Recall and precision after each tie block."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    P = int(labels.sum())
    if P == 0:
        raise ValueError("precision-recall needs at least one positive")
    ends, tp, _ = _tie_blocks(scores, labels)
    return tp / P, tp / ends


def write_scored_pairs(pairs: PairSample, scores: np.ndarray, stream: IO[str]) -> None:
    for a, b, s, y in zip(pairs.i.tolist(), pairs.j.tolist(), scores.tolist(), pairs.label.tolist()):
        stream.write(f"{a}\t{b}\t{s!r}\t{y}\n")


def read_scored_pairs(stream: IO[str]) -> tuple[np.ndarray, np.ndarray]:
    scores, labels = [], []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected i<TAB>j<TAB>score<TAB>label")
        scores.append(float(parts[2]))
        labels.append(int(parts[3]))
    return np.array(scores), np.array(labels, dtype=np.int64)
