"""
Forest archive models for LongiForest

Pydantic records for split summaries, node-level mixed model parameters,
leaf summaries, trees and the persisted forest archive.
"""

from enum import Enum
from typing import Dict, List, Optional
from pydantic import BaseModel, Field, ValidationInfo, field_validator

from .data import FixedSchema, Hyperparams, MarkerSpec, OutcomeType, PredictorKind

ARCHIVE_FORMAT = "longiforest-archive"
ARCHIVE_VERSION = 1


class NodeKind(str, Enum):
    """Split record kinds"""
    LONGITUDINAL = "Longitudinal"
    NUMERIC = "Numeric"
    FACTOR = "Factor"
    LEAF = "Leaf"

    @classmethod
    def from_predictor(cls, kind: PredictorKind) -> "NodeKind":
        return cls(kind.value)


class SplitRecord(BaseModel):
    """One row of the split summary of a tree"""
    node_id: int = Field(..., ge=1)
    kind: NodeKind
    var_index: Optional[int] = Field(None, description="Predictor index within its kind")
    var_name: Optional[str] = None
    feature_index: Optional[int] = Field(None, description="Random-effect index for longitudinal splits")
    threshold: Optional[float] = None
    left_levels: Optional[List[int]] = Field(None, description="Level indices routed left for factor splits")
    missing_left: bool = True
    n_subjects: int = Field(..., ge=0)
    n_events: Optional[int] = None
    depth: int = Field(..., ge=1)

    @property
    def is_leaf(self) -> bool:
        return self.kind == NodeKind.LEAF


class LmmFitRecord(BaseModel):
    """Persisted linear mixed model parameters of one node"""
    marker: str
    beta: List[float]
    b_cov: List[List[float]]
    sigma2: float = Field(..., ge=0)
    loglik: float
    converged: bool
    n_subjects: int
    n_obs: int
    n_iter: int = 0


class CifCurveRecord(BaseModel):
    """Step function over event times"""
    times: List[float] = Field(default_factory=list)
    values: List[float] = Field(default_factory=list)

    @field_validator('values')
    @classmethod
    def validate_lengths(cls, v, info: ValidationInfo):
        if len(v) != len(info.data.get('times', [])):
            raise ValueError("times and values must have equal length")
        return v


class LeafSummary(BaseModel):
    """Outcome summary of a terminal node"""
    n_subjects: int
    mean: Optional[float] = None
    category: Optional[int] = None
    vote_share: Optional[float] = None
    cif: Optional[Dict[int, CifCurveRecord]] = None
    n_events: Optional[int] = None


class TreeRecord(BaseModel):
    """One grown tree"""
    index: int
    seed: List[int] = Field(..., description="Seed sequence entropy of the tree stream")
    splits: List[SplitRecord]
    node_lmm: Dict[int, LmmFitRecord] = Field(default_factory=dict)
    leaves: Dict[int, LeafSummary] = Field(default_factory=dict)
    boot_rows: List[int]
    oob_rows: List[int]
    boot_leaves: List[int]

    def split_map(self) -> Dict[int, SplitRecord]:
        return {record.node_id: record for record in self.splits}

    @property
    def depth(self) -> int:
        return max(record.depth for record in self.splits if record.is_leaf)

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)


class OutcomeInfo(BaseModel):
    """Outcome mode echo stored in the archive"""
    type: OutcomeType
    levels: Optional[List[str]] = None
    causes: Optional[List[int]] = None
    cause: Optional[int] = None


class ForestArchive(BaseModel):
    """Self-describing persisted forest"""
    format: str = ARCHIVE_FORMAT
    version: int = ARCHIVE_VERSION
    outcome: OutcomeInfo
    marker_specs: List[MarkerSpec]
    fixed_schema: FixedSchema
    hyperparams: Hyperparams
    mtry: int
    subject_ids: List[str] = Field(..., description="Training subject order; tree rows index into it")
    data_hash: str
    grid: Optional[List[float]] = Field(None, description="Event times of the cause of interest")
    trees: List[TreeRecord]

    @property
    def ntree(self) -> int:
        return len(self.trees)
