"""
LongiForest Models

Input schemas, numeric tables, forest archive records and result models.
"""

from .data import (
    NsplitOption,
    ColumnKind,
    OutcomeType,
    PredictorKind,
    MarkerSpec,
    FixedColumnSpec,
    FixedSchema,
    OutcomeSpec,
    Hyperparams,
)
from .tables import (
    LongitudinalTable,
    FixedTable,
    Outcome,
    MarkerObservations,
    Predictor,
    PredictorData,
    ValidatedDataset,
)
from .forest import (
    NodeKind,
    SplitRecord,
    LmmFitRecord,
    CifCurveRecord,
    LeafSummary,
    TreeRecord,
    OutcomeInfo,
    ForestArchive,
)
from .results import (
    PredictionResult,
    OobResult,
    VimpResult,
    GroupVimpResult,
    DepthResult,
    ImportanceRow,
    ImportanceTable,
    TuningRow,
    TuningResult,
)
from .simulation import MarkerParams, SimConfig
from .versioning import VersionRecord, VersionedArtifactType

__all__ = [
    "NsplitOption",
    "ColumnKind",
    "OutcomeType",
    "PredictorKind",
    "MarkerSpec",
    "FixedColumnSpec",
    "FixedSchema",
    "OutcomeSpec",
    "Hyperparams",
    "LongitudinalTable",
    "FixedTable",
    "Outcome",
    "MarkerObservations",
    "Predictor",
    "PredictorData",
    "ValidatedDataset",
    "NodeKind",
    "SplitRecord",
    "LmmFitRecord",
    "CifCurveRecord",
    "LeafSummary",
    "TreeRecord",
    "OutcomeInfo",
    "ForestArchive",
    "PredictionResult",
    "OobResult",
    "VimpResult",
    "GroupVimpResult",
    "DepthResult",
    "ImportanceRow",
    "ImportanceTable",
    "TuningRow",
    "TuningResult",
    "MarkerParams",
    "SimConfig",
    "VersionRecord",
    "VersionedArtifactType",
]
