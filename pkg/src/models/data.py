"""
Input schema models for LongiForest

Declarative descriptions of markers, time-fixed columns, outcomes and
forest hyperparameters. These are the validated, user-facing halves of the
data model; the numeric tables built from them live in ``tables``.
"""

import math
from enum import Enum
from typing import Dict, List, Optional
from pydantic import BaseModel, Field, ValidationInfo, field_validator


class NsplitOption(str, Enum):
    """Cutpoint enumeration strategies"""
    QUANTILE = "quantile"
    SAMPLE = "sample"


class ColumnKind(str, Enum):
    """Time-fixed column kinds"""
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


class OutcomeType(str, Enum):
    """Outcome modes"""
    NUMERIC = "numeric"
    FACTOR = "factor"
    SURVIVAL = "survival"


class PredictorKind(str, Enum):
    """Predictor kinds in declared order"""
    LONGITUDINAL = "Longitudinal"
    NUMERIC = "Numeric"
    FACTOR = "Factor"


class MarkerSpec(BaseModel):
    """Linear mixed model specification of one longitudinal marker"""
    name: str = Field(..., description="Marker column name")
    fixed_degrees: List[int] = Field(default_factory=lambda: [0, 1],
                                     description="Polynomial time degrees of the fixed effects")
    random_degrees: List[int] = Field(default_factory=lambda: [0, 1],
                                      description="Polynomial time degrees of the random effects")

    @field_validator('fixed_degrees', 'random_degrees')
    @classmethod
    def validate_degrees(cls, v):
        if any(d < 0 for d in v):
            raise ValueError("Time degrees must be non-negative")
        degrees = sorted(set(v))
        if 0 not in degrees:
            raise ValueError("The intercept (degree 0) must be included")
        return degrees

    @field_validator('random_degrees')
    @classmethod
    def validate_random_subset(cls, v, info: ValidationInfo):
        fixed = info.data.get('fixed_degrees')
        if fixed is not None and not set(v).issubset(fixed):
            raise ValueError("Random time basis must be a subset of the fixed basis")
        return v

    @property
    def n_fixed(self) -> int:
        return len(self.fixed_degrees)

    @property
    def n_random(self) -> int:
        return len(self.random_degrees)

    @property
    def random_positions(self) -> List[int]:
        """Columns of the fixed design that carry a random effect"""
        return [self.fixed_degrees.index(d) for d in self.random_degrees]


class FixedColumnSpec(BaseModel):
    """Declared time-fixed predictor column"""
    name: str
    kind: ColumnKind = ColumnKind.NUMERIC
    levels: Optional[List[str]] = Field(None, validate_default=True)

    @field_validator('levels')
    @classmethod
    def validate_levels(cls, v, info: ValidationInfo):
        if info.data.get('kind') == ColumnKind.CATEGORICAL:
            if not v:
                raise ValueError("Categorical columns require declared levels")
            if len(set(v)) != len(v):
                raise ValueError("Categorical levels must be unique")
        return v


class FixedSchema(BaseModel):
    """Ordered schema of the time-fixed table"""
    columns: List[FixedColumnSpec] = Field(default_factory=list)

    @property
    def numeric_names(self) -> List[str]:
        return [c.name for c in self.columns if c.kind == ColumnKind.NUMERIC]

    @property
    def factor_names(self) -> List[str]:
        return [c.name for c in self.columns if c.kind == ColumnKind.CATEGORICAL]

    @property
    def factor_levels(self) -> Dict[str, List[str]]:
        return {c.name: list(c.levels or []) for c in self.columns if c.kind == ColumnKind.CATEGORICAL}


class OutcomeSpec(BaseModel):
    """Outcome declaration"""
    type: OutcomeType
    column: str = Field("y", description="Outcome column for numeric and factor outcomes")
    levels: Optional[List[str]] = Field(None, description="Factor levels; sorted observed values when absent")
    time_column: str = Field("time", description="Event or censoring time column")
    event_column: str = Field("event", description="Cause code column, 0 = censored")
    cause: Optional[int] = Field(None, description="Cause of interest")


class Hyperparams(BaseModel):
    """Forest hyperparameters"""
    ntree: int = Field(200, ge=1)
    mtry: Optional[int] = Field(None, ge=1, description="Candidates per node; round(sqrt(P+Q)) when absent")
    nodesize: int = Field(1, ge=1)
    minsplit: int = Field(2, ge=2)
    nsplit_option: NsplitOption = NsplitOption.QUANTILE
    seed: int = Field(1234, ge=0, lt=2 ** 64)
    ibs_min: Optional[float] = None
    ibs_max: Optional[float] = None

    @field_validator('ibs_max')
    @classmethod
    def validate_ibs_range(cls, v, info: ValidationInfo):
        low = info.data.get('ibs_min')
        if v is not None and low is not None and not low < v:
            raise ValueError("ibs_min must be smaller than ibs_max")
        return v

    def resolved_mtry(self, n_predictors: int) -> int:
        """Return mtry, defaulting to the rounded square root of the predictor count"""
        if self.mtry is not None:
            return self.mtry
        return max(1, int(math.floor(math.sqrt(n_predictors) + 0.5)))
