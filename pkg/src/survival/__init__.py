"""
LongiForest Survival Statistics

Nonparametric incidence estimators, two-sample splitting statistics and
IPCW prediction error for competing risks outcomes.
"""

from .estimators import (
    SurvSample,
    StepFunction,
    CifCurve,
    kaplan_meier,
    nelson_aalen_cif,
    aalen_johansen_cif,
    censoring_km,
    leaf_cif,
)
from .two_sample import logrank_stat, gray_stat, statistic_pvalue
from .brier import brier_score, integrated_brier, integrated_brier_components, ipcw_weights

__all__ = [
    "SurvSample",
    "StepFunction",
    "CifCurve",
    "kaplan_meier",
    "nelson_aalen_cif",
    "aalen_johansen_cif",
    "censoring_km",
    "leaf_cif",
    "logrank_stat",
    "gray_stat",
    "statistic_pvalue",
    "brier_score",
    "integrated_brier",
    "integrated_brier_components",
    "ipcw_weights",
]
