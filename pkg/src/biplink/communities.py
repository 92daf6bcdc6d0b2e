"""Two-level map-equation community detection and the community density score.

The bipartite graph is treated as a plain undirected graph.  Random-walk
visit rates are proportional to degree, each link carries flow ``1/(2m)`` in
each direction, and the two-level description length is::

    L(M) = plogp(q) - 2 Σ_i plogp(q_i) - Σ_a plogp(p_a) + Σ_i plogp(q_i + p_i)

with ``q_i`` the exit flow of module ``i``, ``q = Σ q_i`` and ``p_i`` the
total visit rate of its nodes (log base 2).  The optimizer is a greedy
node-move search with Louvain-style aggregation, alternated with leaf-level
re-moves until the code length stops improving.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit
from scipy import sparse

from .errors import EmptyGraphError, StalePartitionError
from .graph import BipartiteGraph, NodeRef, Side, connected_components

DEFAULT_TRIALS = 10
_EPS = 1e-10

Detector = Callable[[BipartiteGraph, int], np.ndarray]


def _plogp(x: float) -> float:
    return x * math.log2(x) if x > 0.0 else 0.0


# -- map equation ---------------------------------------------------------


def codelength(adj: sparse.csr_matrix, labels: np.ndarray) -> float:
    """Two-level map equation of ``labels`` on a symmetric weighted adjacency."""
    adj = sparse.csr_matrix(adj)
    total = adj.data.sum()
    if total == 0:
        return 0.0
    labels = np.asarray(labels)
    strength = np.asarray(adj.sum(axis=1)).ravel()
    p = strength / total
    coo = adj.tocoo()
    cross = labels[coo.row] != labels[coo.col]
    k = int(labels.max()) + 1
    q_mod = np.bincount(labels[coo.row[cross]], weights=coo.data[cross] / total, minlength=k)
    p_mod = np.bincount(labels, weights=p, minlength=k)
    q = q_mod.sum()
    return float(
        _plogp(q)
        - 2.0 * sum(_plogp(x) for x in q_mod)
        - sum(_plogp(x) for x in p)
        + sum(_plogp(a + b) for a, b in zip(q_mod, p_mod))
    )


def map_equation(g: BipartiteGraph, labels: np.ndarray) -> float:
    """Code length of a node labelling given over users then repos."""
    return codelength(g.unified_adjacency(), labels)


# -- optimizer ------------------------------------------------------------


@njit(cache=True)
def _plogp_nb(x):
    return x * np.log2(x) if x > 0.0 else 0.0


@njit(cache=True)
def _sweep(order, indptr, indices, flow, p, x, labels, mod_p, mod_q, size, empty, state, acc, mark, touched, eps):
    """One pass of greedy best moves over ``order``; returns the number of moves.

    ``state`` holds ``[sum_q, n_empty, stamp]``.  Candidate modules are
    visited in first-touch order of the node's neighbor list, then the top
    empty module, so ties resolve deterministically.
    """
    sum_q = state[0]
    n_empty = int(state[1])
    stamp = int(state[2])
    moves = 0
    for v in order:
        stamp += 1
        a = labels[v]
        pv = p[v]
        xv = x[v]
        nt = 0
        for j in range(indptr[v], indptr[v + 1]):
            b = labels[indices[j]]
            if mark[b] != stamp:
                mark[b] = stamp
                acc[b] = 0.0
                touched[nt] = b
                nt += 1
            acc[b] += flow[j]
        wa = acc[a] if mark[a] == stamp else 0.0
        qa = mod_q[a]
        pa = mod_p[a]
        qa_new = qa - xv + 2.0 * wa
        pa_new = pa - pv
        base_a = -2.0 * (_plogp_nb(qa_new) - _plogp_nb(qa)) + _plogp_nb(qa_new + pa_new) - _plogp_nb(qa + pa)
        if size[a] > 1 and n_empty > 0:
            e = empty[n_empty - 1]
            if mark[e] != stamp:
                mark[e] = stamp
                acc[e] = 0.0
                touched[nt] = e
                nt += 1
        best_b = a
        best_delta = -eps
        best_qb = 0.0
        plogp_sum = _plogp_nb(sum_q)
        for t in range(nt):
            b = touched[t]
            if b == a:
                continue
            qb = mod_q[b]
            pb = mod_p[b]
            qb_new = qb + xv - 2.0 * acc[b]
            new_sum = sum_q - qa + qa_new - qb + qb_new
            delta = (
                _plogp_nb(new_sum)
                - plogp_sum
                + base_a
                - 2.0 * (_plogp_nb(qb_new) - _plogp_nb(qb))
                + _plogp_nb(qb_new + pb + pv)
                - _plogp_nb(qb + pb)
            )
            if delta < best_delta:
                best_b = b
                best_delta = delta
                best_qb = qb_new
        if best_b == a:
            continue
        b = best_b
        sum_q += (qa_new - qa) + (best_qb - mod_q[b])
        mod_q[a] = qa_new
        mod_p[a] = pa_new
        mod_q[b] = best_qb
        mod_p[b] += pv
        size[a] -= 1
        if size[b] == 0:
            for i in range(n_empty - 1, -1, -1):
                if empty[i] == b:
                    empty[i] = empty[n_empty - 1]
                    n_empty -= 1
                    break
        size[b] += 1
        if size[a] == 0:
            mod_q[a] = 0.0
            mod_p[a] = 0.0
            empty[n_empty] = a
            n_empty += 1
        labels[v] = b
        moves += 1
    state[0] = sum_q
    state[1] = n_empty
    state[2] = stamp
    return moves


class _Level:
    """One level of the aggregation hierarchy: CSR flows without self-loops."""

    __slots__ = ("n", "indptr", "indices", "flow", "p", "x")

    def __init__(self, indptr, indices, flow, p):
        self.n = p.size
        self.indptr = indptr
        self.indices = indices
        self.flow = flow
        self.p = p
        self.x = np.bincount(np.repeat(np.arange(self.n), np.diff(indptr)), weights=flow, minlength=self.n)

    @classmethod
    def from_adjacency(cls, adj: sparse.csr_matrix) -> "_Level":
        adj = sparse.csr_matrix(adj, dtype=np.float64)
        total = adj.data.sum()
        p = np.asarray(adj.sum(axis=1)).ravel() / total
        return cls._build(adj.tocoo(), total, p)

    @classmethod
    def _build(cls, coo, total, p) -> "_Level":
        keep = coo.row != coo.col
        m = sparse.csr_matrix(
            (coo.data[keep] / total, (coo.row[keep], coo.col[keep])), shape=(p.size, p.size)
        )
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.indptr.astype(np.int64), m.indices.astype(np.int64), m.data.astype(np.float64), p)

    def aggregate(self, labels: np.ndarray, k: int) -> "_Level":
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        coo = sparse.coo_matrix((self.flow, (labels[rows], labels[self.indices])), shape=(k, k))
        return _Level._build(coo, 1.0, np.bincount(labels, weights=self.p, minlength=k))

    def codelength(self, labels: np.ndarray, node_term: float) -> float:
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        k = int(labels.max()) + 1
        cross = labels[rows] != labels[self.indices]
        q = np.bincount(labels[rows[cross]], weights=self.flow[cross], minlength=k)
        pm = np.bincount(labels, weights=self.p, minlength=k)
        return (
            _plogp(q.sum())
            - 2.0 * sum(_plogp(v) for v in q.tolist())
            - node_term
            + sum(_plogp(v) for v in (q + pm).tolist())
        )


def _move_nodes(level: _Level, labels: np.ndarray, rng: np.random.Generator, max_sweeps: int = 50) -> tuple[np.ndarray, bool]:
    """Greedy best-move sweeps in random order until no node moves."""
    n = level.n
    labels = np.array(labels, dtype=np.int64)
    mod_p = np.bincount(labels, weights=level.p, minlength=n).astype(np.float64)
    rows = np.repeat(np.arange(n), np.diff(level.indptr))
    cross = labels[rows] != labels[level.indices]
    mod_q = np.bincount(labels[rows[cross]], weights=level.flow[cross], minlength=n).astype(np.float64)
    size = np.bincount(labels, minlength=n).astype(np.int64)
    empty = np.zeros(n, dtype=np.int64)
    free = np.flatnonzero(size == 0)
    empty[: free.size] = free
    state = np.array([mod_q.sum(), free.size, 0.0])
    acc = np.zeros(n)
    mark = np.zeros(n, dtype=np.int64)
    touched = np.zeros(n, dtype=np.int64)
    moved_any = False
    for _ in range(max_sweeps):
        order = rng.permutation(n).astype(np.int64)
        moves = _sweep(
            order, level.indptr, level.indices, level.flow, level.p, level.x,
            labels, mod_p, mod_q, size, empty, state, acc, mark, touched, _EPS,
        )
        if not moves:
            break
        moved_any = True
    return labels, moved_any


def _compress(labels: np.ndarray) -> tuple[np.ndarray, int]:
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first, kind="stable"), kind="stable")
    return rank[inverse].astype(np.int64), int(first.size)


def _louvain(leaf: _Level, assign: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    assign, k = _compress(assign)
    level = leaf.aggregate(assign, k) if k < leaf.n else leaf
    while level.n > 1:
        labels, moved = _move_nodes(level, np.arange(level.n), rng)
        labels, k = _compress(labels)
        if not moved or k == level.n:
            break
        assign = labels[assign]
        level = level.aggregate(labels, k)
    return assign


def _trial(leaf: _Level, node_term: float, seed: int, max_rounds: int = 20) -> tuple[np.ndarray, float]:
    rng = np.random.default_rng(seed)
    best = np.arange(leaf.n)
    best_len = leaf.codelength(best, node_term)
    current = best
    for _ in range(max_rounds):
        # fine-tune single nodes against current modules, then coarse-merge modules
        current, _ = _move_nodes(leaf, current, rng)
        current = _louvain(leaf, current, rng)
        length = leaf.codelength(current, node_term)
        if length < best_len - _EPS:
            best, best_len = current, length
        else:
            break
    return _compress(best)[0], best_len


def infomap_labels(adj: sparse.csr_matrix, seed: int = 42, trials: int = DEFAULT_TRIALS) -> tuple[np.ndarray, float]:
    """Best of ``trials`` optimizer runs with seeds ``seed .. seed+trials-1``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = adj.shape[0]
    if n <= 2 or adj.nnz == 0:
        labels = np.zeros(n, dtype=np.int64)
        return labels, codelength(adj, labels)
    leaf = _Level.from_adjacency(adj)
    node_term = sum(_plogp(x) for x in leaf.p.tolist())
    best_labels, best_len = None, math.inf
    for t in range(trials):
        labels, length = _trial(leaf, node_term, seed + t)
        if length < best_len - _EPS:
            best_labels, best_len = labels, length
    return np.asarray(best_labels, dtype=np.int64), best_len


def label_propagation(adj: sparse.csr_matrix, seed: int = 42, max_sweeps: int = 100) -> np.ndarray:
    """Asynchronous label propagation; a cheap stand-in detector for tests."""
    rng = np.random.default_rng(seed)
    n = adj.shape[0]
    labels = np.arange(n)
    for _ in range(max_sweeps):
        changed = False
        for v in rng.permutation(n):
            nb = adj.indices[adj.indptr[v] : adj.indptr[v + 1]]
            if nb.size == 0:
                continue
            counts = np.bincount(labels[nb], minlength=n)
            best = int(np.flatnonzero(counts == counts.max())[0])
            if labels[v] != best and counts[labels[v]] < counts[best]:
                labels[v] = best
                changed = True
        if not changed:
            break
    return labels


# -- partition ------------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """Community assignment over users and repos with per-community tallies."""

    user_assignment: np.ndarray
    repo_assignment: np.ndarray
    user_counts: np.ndarray
    repo_counts: np.ndarray
    internal_links: np.ndarray
    codelength: float | None = None

    @property
    def community_count(self) -> int:
        return int(self.user_counts.size)

    @classmethod
    def from_labels(cls, g: BipartiteGraph, labels: np.ndarray, codelength: float | None = None) -> "Partition":
        """Build from labels over users then repos; ids are renumbered by first appearance."""
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size != g.node_count:
            raise ValueError("one label per node required")
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        order = np.argsort(np.argsort(first, kind="stable"), kind="stable")
        canon = order[inverse]
        k = int(first.size)
        ua, ra = canon[: g.user_count], canon[g.user_count :]
        e = g.edges()
        same = ua[e[:, 0]] == ra[e[:, 1]]
        internal = np.bincount(ua[e[same, 0]], minlength=k)
        for a in (ua, ra):
            a.setflags(write=False)
        return cls(
            ua,
            ra,
            np.bincount(ua, minlength=k),
            np.bincount(ra, minlength=k),
            internal,
            codelength,
        )

    @property
    def labels(self) -> np.ndarray:
        return np.concatenate([self.user_assignment, self.repo_assignment])

    def community_of(self, x: NodeRef) -> int:
        arr = self.user_assignment if x.side is Side.USER else self.repo_assignment
        if not 0 <= x.index < arr.size:
            raise StalePartitionError(f"node {x} is not covered by this partition")
        return int(arr[x.index])

    def max_links(self, c: int) -> int:
        return int(self.user_counts[c]) * int(self.repo_counts[c])

    def density(self, c: int) -> float:
        mc = self.max_links(c)
        return float(self.internal_links[c]) / mc if mc else 0.0

    def densities(self) -> np.ndarray:
        mc = self.user_counts * self.repo_counts
        out = np.zeros(self.community_count)
        np.divide(self.internal_links, mc, out=out, where=mc > 0)
        return out


def community_score(p: Partition, x: NodeRef, y: NodeRef) -> float:
    """Link density of the shared community, or 0 when ``x`` and ``y`` are apart."""
    cx, cy = p.community_of(x), p.community_of(y)
    if cx != cy:
        return 0.0
    return p.density(cx)


class CommunityScorer:
    def __init__(self, partition: Partition):
        self.partition = partition
        self._dens = partition.densities()

    def score(self, u: int, r: int) -> float:
        return community_score(self.partition, NodeRef.user(u), NodeRef.repo(r))

    def score_pairs(self, pairs: np.ndarray) -> np.ndarray:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        p = self.partition
        if pairs.size and (pairs[:, 0].max() >= p.user_assignment.size or pairs[:, 1].max() >= p.repo_assignment.size):
            raise StalePartitionError("pair outside the partition's node set")
        cu = p.user_assignment[pairs[:, 0]]
        cr = p.repo_assignment[pairs[:, 1]]
        return np.where(cu == cr, self._dens[cu], 0.0)


def detect_communities(
    g: BipartiteGraph,
    seed: int = 42,
    trials: int = DEFAULT_TRIALS,
    *,
    detector: Detector | None = None,
    warn_disconnected: bool = True,
) -> Partition:
    """Partition ``g`` by minimizing the two-level map equation.

    A disconnected graph is split into components that are optimized
    independently.  The result depends only on ``(g, seed, trials)``.
    """
    if g.node_count == 0:
        raise EmptyGraphError("cannot detect communities on an empty graph")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    adj = g.unified_adjacency()

    def run(sub: sparse.csr_matrix) -> np.ndarray:
        if detector is not None:
            return np.asarray(detector(sub, seed), dtype=np.int64)
        return infomap_labels(sub, seed, trials)[0]

    count, ul, rl = connected_components(g)
    comp = np.concatenate([ul, rl])
    if count == 1:
        labels = run(adj)
    else:
        if warn_disconnected:
            warnings.warn(f"graph has {count} components; detecting communities per component", stacklevel=2)
        labels = np.empty(g.node_count, dtype=np.int64)
        offset = 0
        order = np.argsort(comp, kind="stable")
        bounds = np.searchsorted(comp[order], np.arange(count + 1))
        for c in range(count):
            nodes = order[bounds[c] : bounds[c + 1]]
            if nodes.size <= 2:
                sub_labels = np.zeros(nodes.size, dtype=np.int64)
            else:
                sub_labels = run(adj[nodes][:, nodes])
            labels[nodes] = sub_labels + offset
            offset += int(sub_labels.max()) + 1
    return Partition.from_labels(g, labels, codelength(adj, labels))


# -- partition file -------------------------------------------------------


def format_partition(p: Partition) -> str:
    lines = [f"u{i}\t{c}" for i, c in enumerate(p.user_assignment.tolist())]
    lines += [f"r{i}\t{c}" for i, c in enumerate(p.repo_assignment.tolist())]
    return "\n".join(lines) + "\n"


def parse_partition(text: str, g: BipartiteGraph) -> Partition:
    from .errors import FormatError

    labels = np.full(g.node_count, -1, dtype=np.int64)
    for no, ln in enumerate(text.splitlines(), 1):
        if not ln or ln.startswith("#"):
            continue
        try:
            tag, cid = ln.split("\t")
            side, idx = tag[0], int(tag[1:])
            cid = int(cid)
        except ValueError:
            raise FormatError(f"partition line {no}: expected '<u|r><index>\\t<community>'") from None
        if side == "u" and 0 <= idx < g.user_count:
            labels[idx] = cid
        elif side == "r" and 0 <= idx < g.repo_count:
            labels[g.user_count + idx] = cid
        else:
            raise FormatError(f"partition line {no}: node {tag!r} not in graph")
    if (labels < 0).any():
        raise FormatError("partition does not cover every node")
    return Partition.from_labels(g, labels, map_equation(g, labels))
