"""
Run configuration for the command-line interface.

A RunConfig is read from a JSON file; command-line flags then override
individual fields. Relative data paths resolve against the directory of the
configuration file.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator

from ..models.data import FixedSchema, Hyperparams, MarkerSpec, OutcomeSpec
from ..utils.errors import InvalidConfig

DATA_PATH_FIELDS = ("longitudinal", "fixed", "outcome")


class DataSource(BaseModel):
    """Input files and shared column names"""
    longitudinal: Optional[str] = Field(None, description="Long-format marker file")
    fixed: Optional[str] = Field(None, description="One row per subject of time-fixed predictors")
    outcome: Optional[str] = Field(None, description="One row per subject outcome file")
    id_column: str = "id"
    time_column: str = "time"
    sep: str = ","

    @field_validator('sep')
    @classmethod
    def validate_sep(cls, v):
        if len(v) != 1:
            raise ValueError("Delimiter must be a single character")
        return v


class OutputSpec(BaseModel):
    """Where results are written"""
    directory: str = "output"
    model: str = Field("model.json", description="Archive file name inside the output directory")
    vsplit: bool = Field(False, description="Write the split summary of every tree")


class RunConfig(BaseModel):
    """Complete configuration of a run"""
    data: DataSource = Field(default_factory=DataSource)
    markers: List[MarkerSpec] = Field(default_factory=list)
    fixed_schema: FixedSchema = Field(default_factory=FixedSchema)
    outcome: Optional[OutcomeSpec] = None
    hyperparams: Hyperparams = Field(default_factory=Hyperparams)
    output: OutputSpec = Field(default_factory=OutputSpec)
    landmark: Optional[float] = Field(None, description="Landmark time t0 of dynamic predictions")
    averaging: str = Field("oob", description="Trees averaged for OOB landmark predictions: oob or all")
    groups: Dict[str, List[str]] = Field(default_factory=dict)
    vimp_repeats: int = Field(1, ge=1)
    trajectory_permutation: bool = False
    mtry_grid: Optional[List[int]] = None
    n_jobs: int = Field(1, ge=-1)

    @field_validator('n_jobs')
    @classmethod
    def validate_n_jobs(cls, v):
        if v == 0:
            raise ValueError("n_jobs must be positive or -1 for all cores")
        return v

    @field_validator('averaging')
    @classmethod
    def validate_averaging(cls, v):
        if v not in ("oob", "all"):
            raise ValueError("averaging must be 'oob' or 'all'")
        return v

    @classmethod
    def parse(cls, payload: Dict[str, Any]) -> "RunConfig":
        """Validate a configuration tree, mapping failures to InvalidConfig"""
        try:
            return cls.model_validate(payload)
        except ValidationError as e:
            raise InvalidConfig(f"invalid configuration: {e}") from e

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        """Load a JSON configuration file"""
        path = Path(path)
        if not path.exists():
            raise InvalidConfig(f"configuration file {path} does not exist")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise InvalidConfig(f"configuration file {path} is not valid JSON: {e}") from e
        data = payload.get("data") or {}
        for key in DATA_PATH_FIELDS:
            value = data.get(key)
            if value and not Path(value).is_absolute():
                data[key] = str(path.parent / value)
        if data:
            payload["data"] = data
        return cls.parse(payload)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Return a re-validated copy with non-None flag values applied.

        Hyperparameter names (ntree, mtry, ...) update the hyperparams block,
        `cause` updates the outcome block, anything else a top-level field.
        """
        payload = self.model_dump()
        for key, value in overrides.items():
            if value is None:
                continue
            if key in Hyperparams.model_fields:
                payload["hyperparams"][key] = value
            elif key == "cause":
                if payload.get("outcome") is None:
                    raise InvalidConfig("cause given without an outcome block")
                payload["outcome"]["cause"] = value
            elif key in DATA_PATH_FIELDS:
                payload["data"][key] = value
            elif key == "output_dir":
                payload["output"]["directory"] = value
            elif key in RunConfig.model_fields:
                payload[key] = value
            else:
                raise InvalidConfig(f"unknown override {key}")
        return RunConfig.parse(payload)

    def require(self, *fields: str) -> None:
        """Raise InvalidConfig unless the named data paths are set and exist"""
        for name in fields:
            value = getattr(self.data, name)
            if not value:
                raise InvalidConfig(f"data.{name} is required for this command")
            if not Path(value).exists():
                raise InvalidConfig(f"data.{name} file {value} does not exist")
