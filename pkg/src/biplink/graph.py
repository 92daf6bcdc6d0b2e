"""Bipartite user/repository graph, neighborhoods, components and statistics.

Users and repositories are indexed densely per side.  Adjacency is stored in
CSR form in both directions so that ``Γ(u)`` and ``Γ(r)`` are contiguous,
sorted, read-only numpy slices.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .errors import EmptyGraphError, InvalidNodeError, WrongSideError


class Side(enum.Enum):
    USER = "u"
    REPO = "r"


class NodeRef(NamedTuple):
    side: Side
    index: int

    @classmethod
    def user(cls, index: int) -> "NodeRef":
        return cls(Side.USER, int(index))

    @classmethod
    def repo(cls, index: int) -> "NodeRef":
        return cls(Side.REPO, int(index))

    def __str__(self) -> str:
        return f"{self.side.value}{self.index}"


def _csr(rows: np.ndarray, cols: np.ndarray, n_rows: int) -> tuple[np.ndarray, np.ndarray]:
    # rows/cols already sorted by (row, col)
    counts = np.bincount(rows, minlength=n_rows)
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, cols.astype(np.int64, copy=True)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class BipartiteGraph:
    """Immutable simple bipartite graph between users and repositories.

    Duplicate edges collapse to a single link.  Construction validates that
    every index is in range; after that the object never changes, so it can
    be shared freely between threads.

    Args:
        user_count: number of user nodes.
        repo_count: number of repository nodes.
        edges: iterable of ``(user_index, repo_index)`` pairs or an ``(m, 2)``
            integer array.
        cache_extended: memoize extended neighborhoods per user.
    """

    __slots__ = (
        "_user_count",
        "_repo_count",
        "_user_ptr",
        "_user_idx",
        "_repo_ptr",
        "_repo_idx",
        "_keys",
        "_ext_cache",
    )

    def __init__(
        self,
        user_count: int,
        repo_count: int,
        edges: Iterable[tuple[int, int]] | np.ndarray = (),
        *,
        cache_extended: bool = True,
    ):
        user_count = int(user_count)
        repo_count = int(repo_count)
        if user_count < 0 or repo_count < 0:
            raise ValueError("node counts must be non-negative")
        arr = np.asarray(edges if isinstance(edges, np.ndarray) else list(edges), dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("edges must be (user, repo) pairs")
        if arr.size:
            if arr[:, 0].min() < 0 or arr[:, 0].max() >= user_count:
                raise InvalidNodeError("user index out of range in edge list")
            if arr[:, 1].min() < 0 or arr[:, 1].max() >= repo_count:
                raise InvalidNodeError("repo index out of range in edge list")
        keys = np.unique(arr[:, 0] * max(repo_count, 1) + arr[:, 1])
        users = keys // max(repo_count, 1)
        repos = keys % max(repo_count, 1)

        self._user_count = user_count
        self._repo_count = repo_count
        self._keys = _readonly(keys)
        uptr, uidx = _csr(users, repos, user_count)
        order = np.lexsort((users, repos))
        rptr, ridx = _csr(repos[order], users[order], repo_count)
        self._user_ptr = _readonly(uptr)
        self._user_idx = _readonly(uidx)
        self._repo_ptr = _readonly(rptr)
        self._repo_idx = _readonly(ridx)
        # Read-through population is idempotent, so racing writers are harmless.
        self._ext_cache: dict[int, np.ndarray] | None = {} if cache_extended else None

    # -- sizes -------------------------------------------------------------
    @property
    def user_count(self) -> int:
        return self._user_count

    @property
    def repo_count(self) -> int:
        return self._repo_count

    @property
    def node_count(self) -> int:
        return self._user_count + self._repo_count

    @property
    def edge_count(self) -> int:
        return int(self._keys.size)

    def __repr__(self) -> str:
        return (
            f"BipartiteGraph(users={self._user_count}, repos={self._repo_count}, "
            f"edges={self.edge_count})"
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return (
            self._user_count == other._user_count
            and self._repo_count == other._repo_count
            and np.array_equal(self._keys, other._keys)
        )

    __hash__ = None  # type: ignore[assignment]

    # -- adjacency ---------------------------------------------------------
    def _check_user(self, u: int) -> int:
        if not 0 <= u < self._user_count:
            raise InvalidNodeError(f"user index {u} out of range [0, {self._user_count})")
        return int(u)

    def _check_repo(self, r: int) -> int:
        if not 0 <= r < self._repo_count:
            raise InvalidNodeError(f"repo index {r} out of range [0, {self._repo_count})")
        return int(r)

    def user_repos(self, u: int) -> np.ndarray:
        """Sorted repository indices linked to user ``u``."""
        u = self._check_user(u)
        return self._user_idx[self._user_ptr[u] : self._user_ptr[u + 1]]

    def repo_users(self, r: int) -> np.ndarray:
        """Sorted user indices linked to repository ``r``."""
        r = self._check_repo(r)
        return self._repo_idx[self._repo_ptr[r] : self._repo_ptr[r + 1]]

    @property
    def user_adj(self) -> list[list[int]]:
        return [self.user_repos(u).tolist() for u in range(self._user_count)]

    @property
    def repo_adj(self) -> list[list[int]]:
        return [self.repo_users(r).tolist() for r in range(self._repo_count)]

    @property
    def user_degrees(self) -> np.ndarray:
        return np.diff(self._user_ptr)

    @property
    def repo_degrees(self) -> np.ndarray:
        return np.diff(self._repo_ptr)

    def edges(self) -> np.ndarray:
        """``(m, 2)`` array of ``(user, repo)`` links sorted by user then repo."""
        width = max(self._repo_count, 1)
        return np.column_stack((self._keys // width, self._keys % width))

    def edge_keys(self) -> np.ndarray:
        """Sorted scalar keys ``user * repo_count + repo`` of every link."""
        return self._keys

    def has_edge(self, u: int, r: int) -> bool:
        self._check_user(u)
        self._check_repo(r)
        key = u * max(self._repo_count, 1) + r
        i = np.searchsorted(self._keys, key)
        return bool(i < self._keys.size and self._keys[i] == key)

    def extended_users(self, u: int) -> np.ndarray:
        """Sorted user indices two steps away from ``u``, excluding ``u``."""
        u = self._check_user(u)
        if self._ext_cache is not None:
            hit = self._ext_cache.get(u)
            if hit is not None:
                return hit
        lo, hi = self._user_ptr[u], self._user_ptr[u + 1]
        parts = [self._repo_idx[self._repo_ptr[r] : self._repo_ptr[r + 1]] for r in self._user_idx[lo:hi]]
        if parts:
            ext = np.unique(np.concatenate(parts))
            ext = ext[ext != u]
        else:
            ext = np.empty(0, dtype=np.int64)
        ext = _readonly(ext)
        if self._ext_cache is not None:
            self._ext_cache[u] = ext
        return ext

    # -- derived graphs ----------------------------------------------------
    def without_edges(self, pairs: np.ndarray | Iterable[tuple[int, int]]) -> "BipartiteGraph":
        """Copy of the graph with the given links removed (node set unchanged)."""
        pairs = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.int64)
        if pairs.size == 0:
            return BipartiteGraph(self._user_count, self._repo_count, self.edges())
        drop = pairs[:, 0] * max(self._repo_count, 1) + pairs[:, 1]
        keep = ~np.isin(self._keys, drop)
        return BipartiteGraph(self._user_count, self._repo_count, self.edges()[keep])

    def with_edges(self, pairs: np.ndarray | Iterable[tuple[int, int]]) -> "BipartiteGraph":
        pairs = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.int64)
        return BipartiteGraph(
            self._user_count, self._repo_count, np.vstack([self.edges(), pairs.reshape(-1, 2)])
        )

    def unified_adjacency(self) -> csr_matrix:
        """Symmetric ``(n, n)`` 0/1 matrix; users first, repos offset by ``user_count``."""
        e = self.edges()
        n = self.node_count
        rows = np.concatenate([e[:, 0], e[:, 1] + self._user_count])
        cols = np.concatenate([e[:, 1] + self._user_count, e[:, 0]])
        data = np.ones(rows.size, dtype=np.float64)
        return csr_matrix((data, (rows, cols)), shape=(n, n))

    def subgraph(self, users: np.ndarray, repos: np.ndarray) -> "BipartiteGraph":
        """Induced subgraph on the given (sorted) users and repos, re-indexed densely."""
        users = np.asarray(users, dtype=np.int64)
        repos = np.asarray(repos, dtype=np.int64)
        umap = np.full(self._user_count, -1, dtype=np.int64)
        rmap = np.full(self._repo_count, -1, dtype=np.int64)
        umap[users] = np.arange(users.size)
        rmap[repos] = np.arange(repos.size)
        e = self.edges()
        nu, nr = umap[e[:, 0]], rmap[e[:, 1]]
        keep = (nu >= 0) & (nr >= 0)
        return BipartiteGraph(users.size, repos.size, np.column_stack((nu[keep], nr[keep])))


def _check_node(g: BipartiteGraph, x: NodeRef) -> None:
    if x.side is Side.USER:
        g._check_user(x.index)
    elif x.side is Side.REPO:
        g._check_repo(x.index)
    else:  # pragma: no cover - NamedTuple can hold anything
        raise InvalidNodeError(f"unknown side {x.side!r}")


def neighbors(g: BipartiteGraph, x: NodeRef) -> frozenset[NodeRef]:
    """Classical neighborhood Γ(x): the opposite-side nodes linked to ``x``."""
    _check_node(g, x)
    if x.side is Side.USER:
        return frozenset(NodeRef.repo(r) for r in g.user_repos(x.index))
    return frozenset(NodeRef.user(u) for u in g.repo_users(x.index))


def extended_neighborhood(g: BipartiteGraph, u: NodeRef) -> frozenset[NodeRef]:
    """Users reachable from user ``u`` in exactly two steps, excluding ``u``.

    Its size is the extended degree ``k'_u`` used by the similarity indices.
    """
    if u.side is not Side.USER:
        raise WrongSideError("extended neighborhood is defined for user nodes only")
    _check_node(g, u)
    return frozenset(NodeRef.user(z) for z in g.extended_users(u.index))


def connected_components(g: BipartiteGraph) -> tuple[int, np.ndarray, np.ndarray]:
    """Return ``(count, user_labels, repo_labels)``."""
    count, labels = _cc(g.unified_adjacency(), directed=False)
    return int(count), labels[: g.user_count], labels[g.user_count :]


@dataclass(frozen=True)
class ComponentMapping:
    """Original indices of the nodes kept in an extracted component."""

    users: np.ndarray
    repos: np.ndarray


def _largest_label(g: BipartiteGraph, count: int, ul: np.ndarray, rl: np.ndarray) -> int:
    sizes = np.bincount(ul, minlength=count) + np.bincount(rl, minlength=count)
    best = sizes.max()
    tied = np.flatnonzero(sizes == best)
    if tied.size == 1:
        return int(tied[0])
    # tie-break: component holding the smallest user index, else smallest repo index
    for u in range(g.user_count):
        if sizes[ul[u]] == best:
            return int(ul[u])
    for r in range(g.repo_count):
        if sizes[rl[r]] == best:
            return int(rl[r])
    raise AssertionError("unreachable")


def largest_connected_component(g: BipartiteGraph, return_mapping: bool = False):
    """Induced subgraph on the largest connected component.

    Ties between equally sized components go to the component containing the
    smallest user index.  Node indices are re-densified preserving order.

    Returns:
        The component graph, or ``(graph, ComponentMapping)`` when
        ``return_mapping`` is true.
    """
    if g.node_count == 0:
        raise EmptyGraphError("graph has no nodes")
    count, ul, rl = connected_components(g)
    label = _largest_label(g, count, ul, rl)
    users = np.flatnonzero(ul == label)
    repos = np.flatnonzero(rl == label)
    sub = g.subgraph(users, repos)
    if return_mapping:
        return sub, ComponentMapping(users, repos)
    return sub


def lcc_fraction(g: BipartiteGraph) -> float:
    if g.node_count == 0:
        return 0.0
    count, ul, rl = connected_components(g)
    sizes = np.bincount(ul, minlength=count) + np.bincount(rl, minlength=count)
    return float(sizes.max() / g.node_count)


def triangle_counts(adj: csr_matrix) -> np.ndarray:
    """Per-node triangle counts of an undirected simple graph.

    Edges are oriented from lower to higher (degree, index) rank and each
    triangle is found once by intersecting forward lists.
    """
    n = adj.shape[0]
    deg = np.diff(adj.indptr)
    rank = np.empty(n, dtype=np.int64)
    rank[np.lexsort((np.arange(n), deg))] = np.arange(n)
    fwd = []
    for v in range(n):
        nb = adj.indices[adj.indptr[v] : adj.indptr[v + 1]]
        fwd.append(np.sort(nb[rank[nb] > rank[v]]))
    tri = np.zeros(n, dtype=np.int64)
    for v in range(n):
        for w in fwd[v]:
            common = np.intersect1d(fwd[v], fwd[w], assume_unique=True)
            if common.size:
                tri[v] += common.size
                tri[w] += common.size
                tri[common] += 1
    return tri


def average_clustering(g: BipartiteGraph) -> float:
    """Mean local clustering coefficient over all nodes (degree < 2 counts as 0)."""
    if g.node_count == 0:
        return 0.0
    adj = g.unified_adjacency()
    deg = np.diff(adj.indptr).astype(np.float64)
    tri = triangle_counts(adj)
    with np.errstate(divide="ignore", invalid="ignore"):
        local = np.where(deg > 1, 2.0 * tri / (deg * (deg - 1)), 0.0)
    return float(local.sum() / g.node_count)


@dataclass(frozen=True)
class GraphStats:
    n: int
    m: int
    user_count: int
    repo_count: int
    avg_user_degree: float
    avg_repo_degree: float
    lcc_fraction: float
    clustering_coefficient: float
    user_degree_histogram: dict[int, int] = field(default_factory=dict)
    repo_degree_histogram: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "user_count": self.user_count,
            "repo_count": self.repo_count,
            "avg_user_degree": self.avg_user_degree,
            "avg_repo_degree": self.avg_repo_degree,
            "lcc_fraction": self.lcc_fraction,
            "clustering_coefficient": self.clustering_coefficient,
            "user_degree_histogram": {str(k): v for k, v in self.user_degree_histogram.items()},
            "repo_degree_histogram": {str(k): v for k, v in self.repo_degree_histogram.items()},
        }


def _histogram(degrees: np.ndarray) -> dict[int, int]:
    return {int(k): int(v) for k, v in sorted(Counter(degrees.tolist()).items())}


def compute_stats(g: BipartiteGraph) -> GraphStats:
    m = g.edge_count
    return GraphStats(
        n=g.node_count,
        m=m,
        user_count=g.user_count,
        repo_count=g.repo_count,
        avg_user_degree=m / g.user_count if g.user_count else 0.0,
        avg_repo_degree=m / g.repo_count if g.repo_count else 0.0,
        lcc_fraction=lcc_fraction(g),
        clustering_coefficient=average_clustering(g),
        user_degree_histogram=_histogram(g.user_degrees),
        repo_degree_histogram=_histogram(g.repo_degrees),
    )


def log_binned_histogram(hist: dict[int, int], base: float = 2.0) -> list[tuple[int, int, int, float]]:
    """Bin a degree histogram on a logarithmic grid.

    Returns rows ``(lo, hi, count, density)`` for bins ``[lo, hi)`` with
    ``lo = base**i``; density is count per unit degree divided by the number
    of nodes with degree >= 1.  Degree 0 is left out (it has no log position).
    """
    positive = {k: v for k, v in hist.items() if k >= 1}
    total = sum(positive.values())
    if not total:
        return []
    top = max(positive)
    n_bins = int(math.floor(math.log(top, base) + 1e-12)) + 1
    rows = []
    for i in range(n_bins):
        lo = int(math.ceil(base**i))
        hi = int(math.ceil(base ** (i + 1)))
        if hi <= lo:
            continue
        count = sum(v for k, v in positive.items() if lo <= k < hi)
        rows.append((lo, hi, count, count / (hi - lo) / total))
    return rows
