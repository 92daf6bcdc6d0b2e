"""Bipartite link prediction and project recommendation for collaboration graphs."""

from .communities import Partition, detect_communities
from .evaluation import compute_auc, evaluate_measure, make_split
from .graph import (
    BipartiteGraph,
    GraphStats,
    NodeRef,
    Side,
    compute_stats,
    extended_neighborhood,
    largest_connected_component,
    neighbors,
)
from .io import IdMap, load_graph, save_graph
from .recommend import recommend_all, recommend_top_n
from .scoring import prepare
from .similarity import Measure, MeasureKind, make_combined, parse_measure, score

__version__ = "0.1.0"

__all__ = [
    "BipartiteGraph",
    "GraphStats",
    "IdMap",
    "Measure",
    "MeasureKind",
    "NodeRef",
    "Partition",
    "Side",
    "compute_auc",
    "compute_stats",
    "detect_communities",
    "evaluate_measure",
    "extended_neighborhood",
    "largest_connected_component",
    "load_graph",
    "make_combined",
    "make_split",
    "neighbors",
    "parse_measure",
    "prepare",
    "recommend_all",
    "recommend_top_n",
    "save_graph",
    "score",
]
