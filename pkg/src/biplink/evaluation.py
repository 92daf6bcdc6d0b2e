"""Random-removal AUC protocol for link prediction.

One evaluation repeat:

1. hold out ``⌊m/10⌋`` links chosen uniformly without replacement (positives)
   and draw the same number of distinct unlinked user/repo pairs (negatives);
2. score both sets on the graph with the positives removed;
3. draw ``⌊m/10⌋`` (positive, negative) index pairs with repetition and
   report ``AUC = (m1 + m2/2) / comparisons`` where ``m1`` counts strict wins
   of the positive and ``m2`` counts ties.

Randomness comes from numpy's PCG64.  Repeat ``i`` of a run with base seed
``s`` uses seed ``s ^ i``; inside a repeat, the split and the comparison
draws use the independent streams ``SeedSequence([purpose, seed])``.
"""

from __future__ import annotations

import time
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import InfeasibleSplitError, PreconditionError
from .graph import BipartiteGraph
from .communities import DEFAULT_TRIALS, detect_communities
from .scoring import PairScorer, prepare
from .similarity import Measure, MeasureKind

SPLIT_STREAM = 0
AUC_STREAM = 1
SCORE_STREAM = 2

ScorerFactory = Callable[[BipartiteGraph, int], PairScorer]


def rng_stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([purpose, int(seed)])))


def repeat_seed(base: int, index: int) -> int:
    return int(base) ^ int(index)


@dataclass(frozen=True)
class EvaluationSplit:
    reduced_graph: BipartiteGraph
    positives: np.ndarray
    negatives: np.ndarray
    seed: int

    @property
    def size(self) -> int:
        return int(len(self.positives))


def _sample_negatives(g: BipartiteGraph, k: int, rng: np.random.Generator) -> np.ndarray:
    nu, nr = g.user_count, g.repo_count
    existing = g.edge_keys()
    total = nu * nr
    if total <= 4_000_000 and g.edge_count > total // 2:
        # dense: enumerate the complement instead of rejecting most draws
        free = np.setdiff1d(np.arange(total, dtype=np.int64), existing, assume_unique=True)
        keys = rng.choice(free, size=k, replace=False)
    else:
        seen: set[int] = set()
        picked: list[int] = []
        while len(picked) < k:
            batch = max(2 * (k - len(picked)), 64)
            cand = rng.integers(0, nu, batch, dtype=np.int64) * nr + rng.integers(0, nr, batch, dtype=np.int64)
            pos = np.searchsorted(existing, cand)
            hit = (pos < existing.size) & (existing[np.minimum(pos, existing.size - 1)] == cand)
            for key in cand[~hit].tolist():
                if key not in seen:
                    seen.add(key)
                    picked.append(key)
                    if len(picked) == k:
                        break
        keys = np.asarray(picked, dtype=np.int64)
    return np.column_stack((keys // nr, keys % nr))


def make_split(g: BipartiteGraph, seed: int) -> EvaluationSplit:
    """Hold out ``⌊m/10⌋`` links and sample as many never-linked pairs."""
    m = g.edge_count
    if m < 10:
        raise PreconditionError(f"need at least 10 links to split, got {m}")
    k = m // 10
    if g.user_count * g.repo_count - m < k:
        raise InfeasibleSplitError(f"only {g.user_count * g.repo_count - m} unlinked pairs for {k} negatives")
    rng = rng_stream(seed, SPLIT_STREAM)
    edges = g.edges()
    positives = edges[rng.choice(m, size=k, replace=False)]
    # negatives come from the original link set, so held-out links are never drawn
    negatives = _sample_negatives(g, k, rng)
    return EvaluationSplit(g.without_edges(positives), positives, negatives, int(seed))


@dataclass(frozen=True)
class AucResult:
    measure: str
    auc: float
    m1: int
    m2: int
    comparisons: int
    seed: int
    wall_time: float = 0.0
    exact: bool = False

    @property
    def fraction(self) -> Fraction:
        """The AUC as an exact rational; ``auc`` is its nearest double."""
        return Fraction(2 * self.m1 + self.m2, 2 * self.comparisons)

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "measure": self.measure,
            "auc": self.auc,
            "m1": self.m1,
            "m2": self.m2,
            "comparisons": self.comparisons,
            "seed": self.seed,
            "exact": self.exact,
        }
        if timing:
            d["wall_time"] = self.wall_time
        return d


def compute_auc(
    scores_pos: Sequence[float],
    scores_neg: Sequence[float],
    seed: int,
    *,
    split: EvaluationSplit | None = None,
    comparisons: int | None = None,
    exact: bool = False,
    epsilon: float = 0.0,
    measure: str = "",
) -> AucResult:
    """AUC from positive and negative scores.

    The default estimator draws ``comparisons`` (default: number of
    positives) index pairs with repetition.  ``exact=True`` compares every
    positive with every negative instead.  Ties are exact equality unless
    ``epsilon`` > 0, in which case ``|a - b| <= epsilon`` counts as a tie.
    """
    pos = np.asarray(scores_pos, dtype=np.float64)
    neg = np.asarray(scores_neg, dtype=np.float64)
    if split is not None and (pos.size != split.size or neg.size != len(split.negatives)):
        raise ValueError("score lists do not align with the split")
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need at least one positive and one negative score")
    if np.isnan(pos).any() or np.isnan(neg).any():
        raise ValueError("scores contain NaN")
    if exact:
        srt = np.sort(neg)
        lo = np.searchsorted(srt, pos - epsilon, side="left")
        hi = np.searchsorted(srt, pos + epsilon, side="right")
        m1 = int(lo.sum())
        m2 = int((hi - lo).sum())
        n = int(pos.size * neg.size)
    else:
        n = int(comparisons if comparisons is not None else pos.size)
        if n < 1:
            raise ValueError("comparisons must be >= 1")
        rng = rng_stream(seed, AUC_STREAM)
        a = pos[rng.integers(0, pos.size, n)]
        b = neg[rng.integers(0, neg.size, n)]
        if epsilon > 0:
            tie = np.abs(a - b) <= epsilon
        else:
            tie = a == b
        m1 = int(((a > b) & ~tie).sum())
        m2 = int(tie.sum())
    return AucResult(measure, (2 * m1 + m2) / (2 * n), m1, m2, n, int(seed), exact=exact)


@dataclass
class Evaluation:
    results: list[AucResult]
    mean: float = field(init=False)
    std: float = field(init=False)

    def __post_init__(self):
        aucs = [r.auc for r in self.results]
        self.mean = float(np.mean(aucs))
        self.std = float(np.std(aucs, ddof=1)) if len(aucs) > 1 else 0.0

    def to_dict(self, timing: bool = False) -> dict:
        return {
            "repeats": [r.to_dict(timing) for r in self.results],
            "summary": {"mean": self.mean, "std": self.std},
        }


MeasureLike = Union[Measure, ScorerFactory]

PARTITION_SOURCES = ("reduced", "full")


def uses_community(measure: Measure) -> bool:
    if measure.kind is MeasureKind.COMBINED:
        return any(uses_community(m) for m, _ in measure.components)
    return measure.kind is MeasureKind.COMMUNITY


def _describe(measure: MeasureLike) -> str:
    if isinstance(measure, Measure):
        return str(measure)
    return getattr(measure, "__name__", type(measure).__name__)


def run_repeat(
    g: BipartiteGraph,
    measure: MeasureLike,
    seed: int,
    *,
    exact: bool = False,
    epsilon: float = 0.0,
    **prepare_kwargs,
) -> AucResult:
    t0 = time.perf_counter()
    split = make_split(g, seed)
    if isinstance(measure, Measure):
        prepare_kwargs.setdefault("seed", seed)
        scorer = prepare(measure, split.reduced_graph, **prepare_kwargs)
    else:
        scorer = measure(split.reduced_graph, seed)
    sp = scorer.score_pairs(split.positives)
    sn = scorer.score_pairs(split.negatives)
    res = compute_auc(sp, sn, seed, split=split, exact=exact, epsilon=epsilon, measure=_describe(measure))
    return AucResult(res.measure, res.auc, res.m1, res.m2, res.comparisons, res.seed, time.perf_counter() - t0, exact)


def evaluate_measure(
    g: BipartiteGraph,
    measure: MeasureLike,
    seed: int = 42,
    repeats: int = 20,
    *,
    exact: bool = False,
    epsilon: float = 0.0,
    threads: int = 1,
    partition_source: str = "reduced",
    **prepare_kwargs,
) -> Evaluation:
    """Run ``repeats`` independent splits and report every AUC plus mean and std.

    Args:
        measure: a :class:`Measure` or a factory ``(reduced_graph, seed) ->
            scorer``.
        partition_source: ``"reduced"`` re-detects communities on every
            reduced graph, so held-out links stay unseen.  ``"full"`` detects
            once on ``g`` (seeded with ``seed``) and reuses that partition;
            its densities include the held-out links.
        prepare_kwargs: forwarded to :func:`biplink.scoring.prepare`.

    Results do not depend on ``threads``.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if partition_source not in PARTITION_SOURCES:
        raise ValueError(f"partition_source must be one of {PARTITION_SOURCES}")
    if (
        partition_source == "full"
        and isinstance(measure, Measure)
        and uses_community(measure)
        and prepare_kwargs.get("partition") is None
    ):
        prepare_kwargs["partition"] = detect_communities(
            g,
            seed,
            prepare_kwargs.get("trials", DEFAULT_TRIALS),
            detector=prepare_kwargs.get("detector"),
            warn_disconnected=False,
        )
    seeds = [repeat_seed(seed, i) for i in range(repeats)]

    def one(s: int) -> AucResult:
        return run_repeat(g, measure, s, exact=exact, epsilon=epsilon, **prepare_kwargs)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    return Evaluation(results)


class RandomScorer:
    """Independent uniform scores; a null model whose AUC is 0.5 on average."""

    def __init__(self, seed: int):
        self._rng = rng_stream(seed, SCORE_STREAM)

    def score(self, u: int, r: int) -> float:
        return float(self._rng.random())

    def score_pairs(self, pairs: np.ndarray) -> np.ndarray:
        return self._rng.random(len(np.asarray(pairs).reshape(-1, 2)))


def random_scorer(g: BipartiteGraph, seed: int) -> RandomScorer:
    return RandomScorer(seed)


def constant_scorer(value: float = 0.0) -> ScorerFactory:
    class _Const:
        def score(self, u, r):
            return value

        def score_pairs(self, pairs):
            return np.full(len(np.asarray(pairs).reshape(-1, 2)), value, dtype=np.float64)

    def factory(g: BipartiteGraph, seed: int):
        return _Const()

    factory.__name__ = f"constant({value!r})"
    return factory

