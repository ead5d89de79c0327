"""
Simulation configuration models.

Default generator coefficients are synthetic: the random intercept of
marker1 and the random slope of marker2 explain about 70% of the outcome
variance, every other marker and fixed covariate is noise.
"""

from typing import List, Optional
from pydantic import BaseModel, Field, ValidationInfo, field_validator


class MarkerParams(BaseModel):
    """Linear mixed trajectory generator of one marker"""
    intercept: float = 0.0
    slope: float = 0.0
    intercept_var: float = Field(1.0, ge=0)
    slope_var: float = Field(0.25, ge=0)
    intercept_slope_cov: float = 0.0
    residual_sd: float = Field(0.5, ge=0)

    @field_validator('intercept_slope_cov')
    @classmethod
    def validate_cov(cls, v, info: ValidationInfo):
        var0, var1 = info.data.get('intercept_var'), info.data.get('slope_var')
        if var0 is not None and var1 is not None and v * v > var0 * var1:
            raise ValueError("Random-effect covariance must be positive semi-definite")
        return v


def default_markers(n_markers: int) -> List[MarkerParams]:
    """Default marker generators; marker1 and marker2 carry the signal"""
    markers = []
    for k in range(n_markers):
        markers.append(MarkerParams(
            intercept=1.0 + 0.5 * k,
            slope=0.3 if k % 2 == 0 else -0.2,
            intercept_var=1.0,
            slope_var=0.25,
            intercept_slope_cov=0.0,
            residual_sd=0.5,
        ))
    return markers


class SimConfig(BaseModel):
    """Configuration of the synthetic numeric-outcome design"""
    n_subjects: int = Field(200, gt=0)
    n_markers: int = Field(6, ge=2)
    n_visits: int = Field(6, ge=1, description="Baseline plus annual visits")
    jitter_sd: float = Field(0.1, ge=0, description="Standard deviation of visit times around annual visits")
    markers: Optional[List[MarkerParams]] = Field(None, validate_default=True)
    gamma0: float = 0.0
    gamma1: float = Field(2.0, description="Effect of the random intercept of marker1")
    gamma2: float = Field(4.0, description="Effect of the random slope of marker2")
    outcome_sd: float = Field(1.85, ge=0)
    n_continuous_covariates: int = Field(2, ge=0)
    n_binary_covariates: int = Field(2, ge=0)
    binary_prob: float = Field(0.5, gt=0, lt=1)
    seed: int = Field(1234, ge=0)

    @field_validator('markers')
    @classmethod
    def validate_markers(cls, v, info: ValidationInfo):
        n_markers = info.data.get('n_markers')
        if n_markers is None:
            return v
        if v is None:
            return default_markers(n_markers)
        if len(v) != n_markers:
            raise ValueError(f"Expected {n_markers} marker generators, got {len(v)}")
        return v

    @property
    def marker_names(self) -> List[str]:
        return [f"marker{k + 1}" for k in range(self.n_markers)]

    @property
    def continuous_names(self) -> List[str]:
        return [f"cont_covar{k + 1}" for k in range(self.n_continuous_covariates)]

    @property
    def binary_names(self) -> List[str]:
        return [f"bin_covar{k + 1}" for k in range(self.n_binary_covariates)]
