"""Top-N repository recommendations for users."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import BipartiteGraph
from .io import IdMap
from .scoring import PairScorer, prepare
from .similarity import COMMUNITY, Measure

DEFAULT_TOP_N = 10


@dataclass(frozen=True)
class Recommendation:
    user: str
    items: tuple[tuple[str, float], ...]
    measure: str
    generated_at: str

    def to_dict(self) -> dict:
        return {
            "user": self.user,
            "items": [{"repo": r, "score": s} for r, s in self.items],
            "measure": self.measure,
            "generated_at": self.generated_at,
        }


def rank_candidates(
    g: BipartiteGraph, scorer: PairScorer, ids: IdMap, u: int, n: int
) -> list[tuple[str, float]]:
    """Score every repo not linked to ``u``; best ``n`` by (score desc, repo id asc).

    Non-finite scores (the internal-link floor) are not recommendable.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    linked = np.zeros(g.repo_count, dtype=bool)
    linked[g.user_repos(u)] = True
    cands = np.flatnonzero(~linked)
    if cands.size == 0:
        return []
    pairs = np.column_stack((np.full(cands.size, u, dtype=np.int64), cands))
    scores = scorer.score_pairs(pairs)
    items = [(ids.repos[r], float(s)) for r, s in zip(cands.tolist(), scores.tolist()) if math.isfinite(s)]
    items.sort(key=lambda it: (-it[1], it[0]))
    return items[:n]


def recommend_top_n(
    g: BipartiteGraph,
    measure: Measure,
    user: str,
    n: int = DEFAULT_TOP_N,
    *,
    ids: IdMap | None = None,
    scorer: PairScorer | None = None,
    generated_at: str = "",
    **prepare_kwargs,
) -> Recommendation:
    """Recommend up to ``n`` repositories to the user with external id ``user``.

    Pass a prepared ``scorer`` to reuse a partition or projection across calls.

    Raises:
        UnknownIdError: ``user`` is not in the id map.
    """
    ids = ids or IdMap.identity(g)
    u = ids.user_index(user)
    scorer = scorer or prepare(measure, g, **prepare_kwargs)
    return Recommendation(user, tuple(rank_candidates(g, scorer, ids, u, n)), str(measure), generated_at)


def recommend_all(
    g: BipartiteGraph,
    measure: Measure = COMMUNITY,
    n: int = DEFAULT_TOP_N,
    *,
    ids: IdMap | None = None,
    generated_at: str = "",
    **prepare_kwargs,
):
    """Yield one :class:`Recommendation` per user, building scorer state once."""
    ids = ids or IdMap.identity(g)
    scorer = prepare(measure, g, **prepare_kwargs)
    for u, name in enumerate(ids.users):
        yield Recommendation(name, tuple(rank_candidates(g, scorer, ids, u, n)), str(measure), generated_at)
