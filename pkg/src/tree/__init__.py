"""
LongiForest Trees

Node splitting, tree growth on bootstrap samples and subject routing.
"""

from .splitting import (
    NodeOutcome,
    SplitScore,
    draw_candidates,
    enumerate_cutpoints,
    enumerate_factor_splits,
    score_split,
)
from .tree_engine import TreeBuilder, GrownTree, SkippedCandidate, grow_tree, route, drop_down

__all__ = [
    "NodeOutcome",
    "SplitScore",
    "draw_candidates",
    "enumerate_cutpoints",
    "enumerate_factor_splits",
    "score_split",
    "TreeBuilder",
    "GrownTree",
    "SkippedCandidate",
    "grow_tree",
    "route",
    "drop_down",
]
