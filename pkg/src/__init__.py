"""
LongiForest - Random forests with longitudinal and time-fixed predictors

Trees summarise repeated marker measurements at every node through the
random effects of a node-level linear mixed model, and predict numeric,
categorical or competing-risks survival outcomes.
"""

__version__ = "0.1.0"
__author__ = "LongiForest Team"
