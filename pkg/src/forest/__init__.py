"""
LongiForest Forests

Forest growth, out-of-bag and new-subject prediction, tuning and reports.
"""

from .forest_engine import ForestEngine, AggregatedPrediction, tree_table, leaf_curves, predictor_kinds

__all__ = ["ForestEngine", "AggregatedPrediction", "tree_table", "leaf_curves", "predictor_kinds"]
