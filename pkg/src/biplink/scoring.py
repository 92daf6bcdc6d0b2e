"""Bind a :class:`Measure` to a graph and score candidate pairs.

Community and internal-link measures need state (a partition or a bottom
projection) built from the graph they score on; :func:`prepare` builds it
once so that a whole evaluation split or recommendation batch shares it.
"""

from __future__ import annotations

import warnings
from typing import Protocol

import numpy as np

from .communities import DEFAULT_TRIALS, CommunityScorer, Detector, Partition, detect_communities
from .graph import BipartiteGraph
from .projection import DEFAULT_DEGREE_CAP, InternalScorer
from .similarity import LocalScorer, Measure, MeasureKind


class PairScorer(Protocol):
    def score(self, u: int, r: int) -> float: ...

    def score_pairs(self, pairs: np.ndarray) -> np.ndarray: ...


class _Negated:
    def __init__(self, inner: PairScorer):
        self.inner = inner

    def score(self, u: int, r: int) -> float:
        return -self.inner.score(u, r)

    def score_pairs(self, pairs: np.ndarray) -> np.ndarray:
        return -self.inner.score_pairs(pairs)


def _minmax(x: np.ndarray) -> np.ndarray:
    finite = x[np.isfinite(x)]
    if finite.size == 0:
        return np.zeros_like(x)
    lo, hi = finite.min(), finite.max()
    if hi == lo:
        return np.where(np.isfinite(x), 0.0, x)
    return (x - lo) / (hi - lo)


class _Combined:
    """Weighted sum of component scores."""

    def __init__(self, parts: list[tuple[PairScorer, float]], normalize: bool):
        self.parts = parts
        self.normalize = normalize

    def score(self, u: int, r: int) -> float:
        if self.normalize:
            raise ValueError("normalized combinations are defined over a batch; use score_pairs")
        return float(sum(w * s.score(u, r) for s, w in self.parts))

    def score_pairs(self, pairs: np.ndarray) -> np.ndarray:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        total = np.zeros(len(pairs), dtype=np.float64)
        for s, w in self.parts:
            x = s.score_pairs(pairs)
            total += w * (_minmax(x) if self.normalize else x)
        return total


def prepare(
    measure: Measure,
    g: BipartiteGraph,
    *,
    weight: MeasureKind = MeasureKind.JACCARD,
    threshold: float = 0.0,
    degree_cap: int | None = DEFAULT_DEGREE_CAP,
    seed: int = 42,
    trials: int = DEFAULT_TRIALS,
    partition: Partition | None = None,
    detector: Detector | None = None,
) -> PairScorer:
    """Return a scorer for ``measure`` on ``g``.

    Args:
        weight, threshold, degree_cap: internal-link projection settings.
        seed, trials, detector: community detection settings, used only when
            no ``partition`` is supplied.
    """
    kind = measure.kind
    if kind is MeasureKind.COMBINED:
        ctx = dict(
            weight=weight, threshold=threshold, degree_cap=degree_cap,
            seed=seed, trials=trials, partition=partition, detector=detector,
        )
        # zero-weight components are dropped before their state is built
        parts = [(prepare(m, g, **ctx), w) for m, w in measure.components if w != 0.0]
        scorer: PairScorer = _Combined(parts, measure.normalize)
    elif kind is MeasureKind.COMMUNITY:
        if partition is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                partition = detect_communities(g, seed, trials, detector=detector, warn_disconnected=False)
        scorer = CommunityScorer(partition)
    elif kind is MeasureKind.INTERNAL:
        scorer = InternalScorer(g, weight, threshold, degree_cap)
    else:
        scorer = LocalScorer(g, kind)
    return _Negated(scorer) if measure.inverted else scorer
