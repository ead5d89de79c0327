"""
Provenance models for forest artifacts.
"""

from datetime import datetime, timezone
from enum import Enum
from typing import Dict, Any, Optional
from pydantic import BaseModel, Field


class VersionedArtifactType(str, Enum):
    """Types of produced artifacts"""
    MODEL_ARCHIVE = "model_archive"
    OOB_REPORT = "oob_report"
    VIMP_REPORT = "vimp_report"
    GVIMP_REPORT = "gvimp_report"
    DEPTH_REPORT = "depth_report"
    PREDICTION = "prediction"
    TUNING = "tuning"
    SIMULATED_DATA = "simulated_data"


class VersionRecord(BaseModel):
    """Record of one produced artifact and the archive it derives from"""
    record_id: str
    artifact_id: str = Field(..., description="Output path of the artifact")
    artifact_type: VersionedArtifactType
    archive_hash: Optional[str] = Field(None, description="SHA-256 of the model archive")
    model_name: str = "longiforest"
    model_version: str
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    metadata: Dict[str, Any] = Field(default_factory=dict)
    notes: Optional[str] = None
