"""User-side (bottom) projection and internal-link prediction.

Two users are linked in the projection when they share at least one
repository; the link weight is one of the local indices evaluated on the
users' plain repository sets.  A candidate ``(u, r)`` is *internal* when
adding it leaves the projection's link set unchanged, i.e. ``u`` is already
projected onto every other user of ``r``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse

from .errors import DegreeCapError, PreconditionError
from .graph import BipartiteGraph
from .similarity import LOCAL_KINDS, MeasureKind, conduit_weights

FLOOR = -math.inf
# JSON cannot carry -inf; the floor is written as the most negative finite double
FLOOR_SERIALIZED = -np.finfo(np.float64).max
DEFAULT_DEGREE_CAP = 10_000


def serialize_score(x: float) -> float:
    if x == FLOOR:
        return float(FLOOR_SERIALIZED)
    if x == -FLOOR:
        return float(-FLOOR_SERIALIZED)
    return float(x)


class BottomProjection:
    """Weighted user-user graph in symmetric CSR form (sorted rows, no self-loops)."""

    def __init__(self, user_count: int, indptr: np.ndarray, indices: np.ndarray, weights: np.ndarray, kind: MeasureKind):
        self.user_count = user_count
        self.indptr = indptr
        self.indices = indices
        self.weights = weights
        self.kind = kind
        for a in (indptr, indices, weights):
            a.setflags(write=False)

    @property
    def link_count(self) -> int:
        return int(self.indices.size // 2)

    def row(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    @property
    def adj(self) -> list[list[tuple[int, float]]]:
        return [list(zip(*(a.tolist() for a in self.row(u)))) for u in range(self.user_count)]

    def has_link(self, u: int, v: int) -> bool:
        idx, _ = self.row(u)
        i = np.searchsorted(idx, v)
        return bool(i < idx.size and idx[i] == v)

    def weight(self, u: int, v: int) -> float:
        idx, w = self.row(u)
        i = np.searchsorted(idx, v)
        if i < idx.size and idx[i] == v:
            return float(w[i])
        raise KeyError((u, v))

    def links(self) -> set[tuple[int, int]]:
        rows = np.repeat(np.arange(self.user_count), np.diff(self.indptr))
        keep = rows < self.indices
        return set(zip(rows[keep].tolist(), self.indices[keep].tolist()))


def _offdiag(m: sparse.csr_matrix) -> sparse.csr_matrix:
    """Drop the diagonal and explicit zeros without leaving CSR form."""
    m = sparse.csr_matrix(m)
    n = m.shape[0]
    rows = np.repeat(np.arange(n, dtype=np.int32), np.diff(m.indptr))
    keep = (rows != m.indices) & (m.data != 0)
    counts = np.bincount(rows[keep], minlength=n)
    del rows
    indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    out = sparse.csr_matrix((m.data[keep], m.indices[keep], indptr), shape=m.shape)
    out.sort_indices()
    return out


def project_bottom(
    g: BipartiteGraph,
    weight: MeasureKind = MeasureKind.JACCARD,
    degree_cap: int | None = DEFAULT_DEGREE_CAP,
) -> BottomProjection:
    """Project ``g`` onto its users, weighting each link with a local index.

    Raises:
        DegreeCapError: a repository has more users than ``degree_cap``; the
            projection would be quadratic in that repository's degree.
    """
    if weight not in LOCAL_KINDS:
        raise ValueError(f"weight function must be a local index, got {weight}")
    rdeg = g.repo_degrees
    if degree_cap is not None and rdeg.size and rdeg.max() > degree_cap:
        r = int(np.argmax(rdeg))
        raise DegreeCapError(f"repo {r} has {int(rdeg[r])} users, above the degree cap {degree_cap}")
    e = g.edges()
    b = sparse.csr_matrix(
        (np.ones(len(e), dtype=np.int32), (e[:, 0], e[:, 1])), shape=(g.user_count, g.repo_count)
    )
    co = _offdiag(b @ b.T)
    rows = np.repeat(np.arange(g.user_count), np.diff(co.indptr))
    cols = co.indices.astype(np.int64)
    inter = co.data.astype(np.int64)
    udeg = g.user_degrees
    ku, kv = udeg[rows], udeg[cols]

    if weight in (MeasureKind.AA, MeasureKind.RA):
        inv_log, inv = conduit_weights(rdeg)
        diag = sparse.diags(inv_log if weight is MeasureKind.AA else inv)
        wmat = _offdiag(b.astype(np.float64) @ diag @ b.T.astype(np.float64))
        if not (np.array_equal(wmat.indptr, co.indptr) and np.array_equal(wmat.indices, co.indices)):
            wmat = wmat.tolil()
            w = np.array([wmat[i, j] for i, j in zip(rows, cols)], dtype=np.float64)
        else:
            w = wmat.data.astype(np.float64)
    elif weight is MeasureKind.CN:
        w = inter.astype(np.float64)
    elif weight is MeasureKind.JACCARD:
        w = inter / (ku + kv - inter)
    elif weight is MeasureKind.HPI:
        w = inter / np.minimum(ku, kv)
    elif weight is MeasureKind.HDI:
        w = inter / np.maximum(ku, kv)
    elif weight is MeasureKind.PA:
        w = (ku * kv).astype(np.float64)
    else:  # SALTON
        w = inter / np.sqrt((ku * kv).astype(np.float64))
    return BottomProjection(g.user_count, co.indptr.astype(np.int64), cols, np.asarray(w, dtype=np.float64), weight)


def _induced(g: BipartiteGraph, u: int, r: int) -> np.ndarray:
    if g.has_edge(u, r):
        raise PreconditionError(f"({u}, {r}) is already a link")
    users = g.repo_users(r)
    return users[users != u]


def is_internal(g: BipartiteGraph, b: BottomProjection, u: int, r: int) -> bool:
    """True when linking ``u`` to ``r`` would add no new projected link."""
    others = _induced(g, u, r)
    idx, _ = b.row(u)
    return bool(np.isin(others, idx, assume_unique=True).all())


def internal_score(g: BipartiteGraph, b: BottomProjection, u: int, r: int, threshold: float = 0.0) -> float:
    """Largest induced projected weight above ``threshold`` for an internal candidate.

    Non-internal candidates and candidates whose induced links all sit at or
    below the threshold score :data:`FLOOR`.
    """
    others = _induced(g, u, r)
    idx, w = b.row(u)
    if others.size == 0:
        return FLOOR
    pos = np.searchsorted(idx, others)
    pos_c = np.minimum(pos, max(idx.size - 1, 0))
    if idx.size == 0 or not np.all(idx[pos_c] == others):
        return FLOOR
    best = float(w[pos_c].max())
    return best if best > threshold else FLOOR


class InternalScorer:
    def __init__(
        self,
        g: BipartiteGraph,
        weight: MeasureKind = MeasureKind.JACCARD,
        threshold: float = 0.0,
        degree_cap: int | None = DEFAULT_DEGREE_CAP,
    ):
        self.graph = g
        self.threshold = threshold
        self.projection = project_bottom(g, weight, degree_cap)

    def score(self, u: int, r: int) -> float:
        return internal_score(self.graph, self.projection, u, r, self.threshold)

    def score_pairs(self, pairs: np.ndarray) -> np.ndarray:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        return np.array([self.score(int(u), int(r)) for u, r in pairs], dtype=np.float64)
