"""
LongiForest Linear Mixed Models

EM maximum likelihood fitting of node-level mixed models and random-effect
feature prediction.
"""

from .lmm_engine import (
    LmmDesign,
    LmmFit,
    SubjectStats,
    fit_lmm,
    fit_lmm_stats,
    predict_random_effects,
    extract_features,
    marginal_loglik,
    feature_name,
)

__all__ = [
    "LmmDesign",
    "LmmFit",
    "SubjectStats",
    "fit_lmm",
    "fit_lmm_stats",
    "predict_random_effects",
    "extract_features",
    "marginal_loglik",
    "feature_name",
]
