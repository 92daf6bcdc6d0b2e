"""Local similarity indices for user -> repository candidate links.

A candidate ``(u, r)`` is compared through user sets: ``X`` is the extended
neighborhood of ``u`` (users two steps away) and ``Y`` is ``Γ(r)``.  With
``I = X ∩ Y``, ``k'_u = |X|`` and ``k_r = |Y|``:

==========  ===============================
cn          ``|I|``
jaccard     ``|I| / |X ∪ Y|``
hpi         ``|I| / min(k'_u, k_r)``
hdi         ``|I| / max(k'_u, k_r)``
pa          ``k'_u * k_r``
aa          ``Σ_{z∈I, k_z≥2} 1 / ln k_z``
ra          ``Σ_{z∈I} 1 / k_z``
salton      ``|I| / sqrt(k'_u * k_r)``
==========  ===============================

``k_z`` is the plain bipartite degree of the conduit user ``z``.  Any index
whose denominator vanishes scores 0.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CompositionError, WrongSideError
from .graph import BipartiteGraph, NodeRef, Side


class MeasureKind(enum.Enum):
    CN = "cn"
    JACCARD = "jaccard"
    HPI = "hpi"
    HDI = "hdi"
    PA = "pa"
    AA = "aa"
    RA = "ra"
    SALTON = "salton"
    COMMUNITY = "community"
    INTERNAL = "internal"
    COMBINED = "combo"


LOCAL_KINDS = (
    MeasureKind.CN,
    MeasureKind.JACCARD,
    MeasureKind.HPI,
    MeasureKind.HDI,
    MeasureKind.PA,
    MeasureKind.AA,
    MeasureKind.RA,
    MeasureKind.SALTON,
)


class MeasureSyntaxError(ValueError):
    """Raised for strings that do not follow the measure grammar."""


GRAMMAR_HELP = (
    "measure grammar: cn | jaccard | hpi | hdi | pa | aa | ra | salton | community | "
    "internal | combo:<m>*<w>+<m>*<w>[+...]; prefix '!' inverts (e.g. '!pa', "
    "'combo:pa*0.7+aa*0.3')"
)


@dataclass(frozen=True)
class Measure:
    """A scoring strategy.  ``components`` is only used by ``COMBINED``."""

    kind: MeasureKind
    inverted: bool = False
    components: tuple[tuple["Measure", float], ...] = ()
    normalize: bool = False

    def __post_init__(self):
        if self.kind is MeasureKind.COMBINED:
            if len(self.components) < 2:
                raise CompositionError("a combined measure needs at least 2 components")
            for m, w in self.components:
                if not isinstance(m, Measure):
                    raise CompositionError(f"component {m!r} is not a Measure")
                if m.kind is MeasureKind.COMBINED:
                    raise CompositionError("combined measures cannot be nested")
                if not math.isfinite(w):
                    raise CompositionError(f"weight {w!r} is not finite")
        elif self.components:
            raise CompositionError(f"{self.kind.value} takes no components")
        elif self.normalize:
            raise CompositionError("normalize applies to combined measures only")

    def invert(self) -> "Measure":
        return Measure(self.kind, not self.inverted, self.components, self.normalize)

    @property
    def is_local(self) -> bool:
        return self.kind in LOCAL_KINDS

    def __str__(self) -> str:
        bang = "!" if self.inverted else ""
        if self.kind is MeasureKind.COMBINED:
            body = "+".join(f"{m}*{w!r}" for m, w in self.components)
            return f"{bang}combo:{body}"
        return f"{bang}{self.kind.value}"


CN = Measure(MeasureKind.CN)
JACCARD = Measure(MeasureKind.JACCARD)
HPI = Measure(MeasureKind.HPI)
HDI = Measure(MeasureKind.HDI)
PA = Measure(MeasureKind.PA)
AA = Measure(MeasureKind.AA)
RA = Measure(MeasureKind.RA)
SALTON = Measure(MeasureKind.SALTON)
COMMUNITY = Measure(MeasureKind.COMMUNITY)
INTERNAL = Measure(MeasureKind.INTERNAL)


def make_combined(weights: Sequence[tuple[Measure, float]], normalize: bool = False) -> Measure:
    """Weighted sum of at least two non-combined measures."""
    return Measure(MeasureKind.COMBINED, components=tuple((m, float(w)) for m, w in weights), normalize=normalize)


# the 0.7 PA + 0.3 AA blend reported as the best local combination
PA_AA_COMBINED = make_combined([(PA, 0.7), (AA, 0.3)])

_SIMPLE = {k.value: k for k in MeasureKind if k is not MeasureKind.COMBINED}
_TERM = re.compile(r"^(!?)([a-z]+)\*([-+0-9.eE]+)$")


def parse_measure(text: str, normalize: bool = False) -> Measure:
    s = text.strip().replace(" ", "")
    inverted = False
    while s.startswith("!"):
        inverted = not inverted
        s = s[1:]
    if s.startswith("combo:"):
        terms = []
        for term in s[len("combo:") :].split("+"):
            mt = _TERM.match(term)
            if not mt or mt.group(2) not in _SIMPLE:
                raise MeasureSyntaxError(f"bad combo term {term!r}\n{GRAMMAR_HELP}")
            try:
                w = float(mt.group(3))
            except ValueError:
                raise MeasureSyntaxError(f"bad weight in {term!r}\n{GRAMMAR_HELP}") from None
            terms.append((Measure(_SIMPLE[mt.group(2)], inverted=bool(mt.group(1))), w))
        try:
            m = make_combined(terms, normalize=normalize)
        except CompositionError as exc:
            raise MeasureSyntaxError(f"{exc}\n{GRAMMAR_HELP}") from None
    elif s in _SIMPLE:
        m = Measure(_SIMPLE[s])
    else:
        raise MeasureSyntaxError(f"unknown measure {text!r}\n{GRAMMAR_HELP}")
    return m.invert() if inverted else m


def index_value(
    kind: MeasureKind, inter: int, ku: int, kr: int, aa_sum: float, ra_sum: float
) -> float:
    """Evaluate one local index from intersection size, degrees and conduit sums."""
    if kind is MeasureKind.CN:
        return float(inter)
    if kind is MeasureKind.JACCARD:
        union = ku + kr - inter
        return inter / union if union else 0.0
    if kind is MeasureKind.HPI:
        lo = min(ku, kr)
        return inter / lo if lo else 0.0
    if kind is MeasureKind.HDI:
        hi = max(ku, kr)
        return inter / hi if hi else 0.0
    if kind is MeasureKind.PA:
        return float(ku * kr)
    if kind is MeasureKind.AA:
        return float(aa_sum)
    if kind is MeasureKind.RA:
        return float(ra_sum)
    if kind is MeasureKind.SALTON:
        prod = ku * kr
        return inter / math.sqrt(prod) if prod else 0.0
    raise ValueError(f"{kind} is not a local index")


def conduit_weights(degrees: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-node ``1/ln k`` (0 when k < 2) and ``1/k`` (0 when k = 0)."""
    deg = np.asarray(degrees, dtype=np.float64)
    inv_log = np.zeros_like(deg)
    ok = deg >= 2
    inv_log[ok] = 1.0 / np.log(deg[ok])
    inv = np.zeros_like(deg)
    inv[deg > 0] = 1.0 / deg[deg > 0]
    return inv_log, inv


class LocalScorer:
    """Scores candidate ``(user, repo)`` pairs with one local index on a fixed graph."""

    def __init__(self, g: BipartiteGraph, kind: MeasureKind):
        if kind not in LOCAL_KINDS:
            raise ValueError(f"{kind} is not a local index")
        self.graph = g
        self.kind = kind
        self._inv_log, self._inv = conduit_weights(g.user_degrees)

    def _from_intersection(self, inter: np.ndarray, ku: int, kr: int) -> float:
        aa = float(self._inv_log[inter].sum()) if self.kind is MeasureKind.AA else 0.0
        ra = float(self._inv[inter].sum()) if self.kind is MeasureKind.RA else 0.0
        return index_value(self.kind, int(inter.size), ku, kr, aa, ra)

    def score(self, u: int, r: int) -> float:
        g = self.graph
        x = g.extended_users(u)
        y = g.repo_users(r)
        if self.kind is MeasureKind.PA:
            return float(x.size * y.size)
        inter = np.intersect1d(x, y, assume_unique=True)
        return self._from_intersection(inter, int(x.size), int(y.size))

    def score_pairs(self, pairs: np.ndarray) -> np.ndarray:
        """Vectorised over pairs; pairs sharing a user reuse one membership mask."""
        g = self.graph
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        out = np.empty(len(pairs), dtype=np.float64)
        if not len(pairs):
            return out
        mask = np.zeros(g.user_count, dtype=bool)
        order = np.argsort(pairs[:, 0], kind="stable")
        current = -1
        x = None
        for i in order:
            u, r = int(pairs[i, 0]), int(pairs[i, 1])
            if u != current:
                if x is not None:
                    mask[x] = False
                x = g.extended_users(u)
                mask[x] = True
                current = u
            y = g.repo_users(r)
            if self.kind is MeasureKind.PA:
                out[i] = float(x.size * y.size)
            else:
                out[i] = self._from_intersection(y[mask[y]], int(x.size), int(y.size))
        return out


def _check_pair(u: NodeRef, r: NodeRef) -> None:
    if u.side is not Side.USER or r.side is not Side.REPO:
        raise WrongSideError("score expects a (user, repo) pair")


def score(g: BipartiteGraph, m: Measure, u: NodeRef, r: NodeRef, **context) -> float:
    """Score one candidate pair.

    Local, inverted and combined-of-local measures need nothing else.  The
    community and internal-link measures build their partition or projection
    on each call; use :func:`biplink.scoring.prepare` to reuse them.
    """
    _check_pair(u, r)
    from .scoring import prepare

    return prepare(m, g, **context).score(u.index, r.index)

