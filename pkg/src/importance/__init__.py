"""
LongiForest Importance

Permutation importance (VIMP, grouped VIMP) and minimal depth analytics.
"""

from .importance_engine import ImportanceEngine, importance_report, permute_predictor, permutation_rng

__all__ = ["ImportanceEngine", "importance_report", "permute_predictor", "permutation_rng"]
