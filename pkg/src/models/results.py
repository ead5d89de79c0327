"""
Result models for LongiForest

Predictions, out-of-bag errors, importance measures and tuning tables.
"""

from typing import Dict, List, Optional, Union
from pydantic import BaseModel, Field, field_validator

from .data import OutcomeType


class PredictionResult(BaseModel):
    """Forest predictions for new subjects"""
    outcome_type: OutcomeType
    t0: Optional[float] = Field(None, description="Landmark time")
    times: Optional[List[float]] = Field(None, description="Survival time grid")
    subject_ids: List[str]
    pred_indiv: List[Union[float, str, List[float]]]
    pred_leaf: List[List[int]] = Field(..., description="Leaf id per subject and tree")
    pred_indiv_proba: Optional[List[float]] = None

    @field_validator('pred_indiv_proba')
    @classmethod
    def validate_proba(cls, v):
        if v is not None and any(p < 0 or p > 1 for p in v):
            raise ValueError("Vote shares must lie in [0, 1]")
        return v


class OobResult(BaseModel):
    """Per-subject out-of-bag errors and their mean"""
    outcome_type: OutcomeType
    subject_ids: List[str]
    errors: List[float]
    oob_error: float
    never_oob: List[str] = Field(default_factory=list)
    n_degenerate_weights: int = 0
    averaging: str = "oob"
    landmark: Optional[float] = None
    archive_hash: Optional[str] = None


class VimpResult(BaseModel):
    """Permutation importance per predictor"""
    predictors: List[str]
    kinds: List[str]
    importance: List[float]
    base_error: float
    seed: int
    repeats: int = 1
    trajectory_permutation: bool = False
    archive_hash: Optional[str] = None

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.predictors, self.importance))


class GroupVimpResult(BaseModel):
    """Permutation importance per predictor group"""
    groups: Dict[str, List[str]]
    importance: Dict[str, float]
    base_error: float
    seed: int
    repeats: int = 1
    archive_hash: Optional[str] = None


class DepthResult(BaseModel):
    """Minimal depth of predictors and features over trees"""
    ntree: int
    mtry: int
    n_predictors: int
    predictor_depth: Dict[str, float] = Field(default_factory=dict)
    predictor_count: Dict[str, int] = Field(default_factory=dict)
    feature_depth: Dict[str, float] = Field(default_factory=dict)
    feature_count: Dict[str, int] = Field(default_factory=dict)
    tree_predictor_depth: List[Dict[str, int]] = Field(default_factory=list)
    tree_feature_depth: List[Dict[str, int]] = Field(default_factory=list)
    tree_usage: List[Dict[str, int]] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)
    archive_hash: Optional[str] = None


class ImportanceRow(BaseModel):
    """One row of an importance report"""
    name: str
    value: float
    percentage: Optional[float] = None
    count: Optional[int] = None


class ImportanceTable(BaseModel):
    """Sorted importance report"""
    kind: str
    rows: List[ImportanceRow] = Field(default_factory=list)
    base_error: Optional[float] = None
    warnings: List[str] = Field(default_factory=list)
    archive_hash: Optional[str] = None


class TuningRow(BaseModel):
    mtry: int
    oob_error: float


class TuningResult(BaseModel):
    """OOB error over an mtry grid"""
    rows: List[TuningRow]
    best_mtry: int
