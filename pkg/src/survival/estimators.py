"""
Nonparametric survival estimators.

Kaplan-Meier, Nelson-Aalen and Aalen-Johansen estimators over distinct
observed times, plus the Kaplan-Meier estimator of the censoring
distribution used for inverse probability of censoring weights.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Tuple

import numpy as np
import pandas as pd

from ..models.forest import CifCurveRecord
from ..utils.errors import InvalidOutcome


@dataclass(frozen=True)
class SurvSample:
    """Right-censored competing risks sample.

    Parameters
    ----------
    time : numpy.ndarray
        Event or censoring times, strictly positive and finite.
    event : numpy.ndarray
        Cause codes, 0 for censored observations.
    """
    time: np.ndarray
    event: np.ndarray

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float)
        event = np.asarray(self.event, dtype=int)
        if time.shape != event.shape:
            raise InvalidOutcome("time and event must have the same length")
        if np.any(~np.isfinite(time)) or np.any(time <= 0):
            raise InvalidOutcome("survival times must be finite and positive")
        if np.any(event < 0):
            raise InvalidOutcome("cause codes must be non-negative")
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)

    def __len__(self) -> int:
        return len(self.time)

    @property
    def causes(self) -> List[int]:
        return sorted(int(c) for c in np.unique(self.event) if c > 0)

    def take(self, rows: np.ndarray) -> "SurvSample":
        return SurvSample(self.time[rows], self.event[rows])


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function with a constant value before the first time"""
    times: np.ndarray
    values: np.ndarray
    initial: float = 0.0

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.times, t, side="right") - 1
        padded = np.concatenate(([self.initial], self.values))
        return padded[pos + 1]

    def left_limit(self, t) -> np.ndarray:
        """Value just before t"""
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.times, t, side="left") - 1
        padded = np.concatenate(([self.initial], self.values))
        return padded[pos + 1]


class CifCurve(StepFunction):
    """Cumulative incidence step function, 0 before the first event time"""

    def __init__(self, times: Iterable[float], values: Iterable[float]):
        super().__init__(np.asarray(list(times), dtype=float), np.asarray(list(values), dtype=float), 0.0)

    def to_record(self) -> CifCurveRecord:
        return CifCurveRecord(times=[float(t) for t in self.times], values=[float(v) for v in self.values])

    @classmethod
    def from_record(cls, record: CifCurveRecord) -> "CifCurve":
        return cls(record.times, record.values)

    def to_frame(self) -> pd.DataFrame:
        """Two-column (time, value) table for plotting"""
        return pd.DataFrame({"time": self.times, "value": self.values})


def risk_table(sample: SurvSample) -> Tuple[np.ndarray, np.ndarray, Dict[int, np.ndarray], np.ndarray]:
    """Distinct times, numbers at risk, per-cause event counts and censoring counts"""
    times, inverse = np.unique(sample.time, return_inverse=True)
    counts = np.bincount(inverse, minlength=len(times))
    at_risk = len(sample) - np.concatenate(([0], np.cumsum(counts)[:-1]))
    by_cause = {
        cause: np.bincount(inverse[sample.event == cause], minlength=len(times))
        for cause in sample.causes
    }
    censored = np.bincount(inverse[sample.event == 0], minlength=len(times))
    return times, at_risk, by_cause, censored


def kaplan_meier(sample: SurvSample) -> StepFunction:
    """All-cause Kaplan-Meier survival function"""
    times, at_risk, by_cause, _ = risk_table(sample)
    deaths = sum(by_cause.values()) if by_cause else np.zeros(len(times), dtype=int)
    survival = np.cumprod(1.0 - deaths / at_risk)
    keep = deaths > 0
    return StepFunction(times[keep], survival[keep], 1.0)


def nelson_aalen_cif(sample: SurvSample) -> CifCurve:
    """Incidence 1 - exp(-H) from the Nelson-Aalen cumulative hazard"""
    times, at_risk, by_cause, _ = risk_table(sample)
    deaths = sum(by_cause.values()) if by_cause else np.zeros(len(times), dtype=int)
    keep = deaths > 0
    hazard = np.cumsum(deaths[keep] / at_risk[keep])
    return CifCurve(times[keep], 1.0 - np.exp(-hazard))


def aalen_johansen_cif(sample: SurvSample, cause: int) -> CifCurve:
    """Aalen-Johansen cumulative incidence of one cause"""
    times, at_risk, by_cause, _ = risk_table(sample)
    if cause not in by_cause:
        return CifCurve([], [])
    deaths = sum(by_cause.values())
    survival = np.cumprod(1.0 - deaths / at_risk)
    survival_before = np.concatenate(([1.0], survival[:-1]))
    increments = survival_before * by_cause[cause] / at_risk
    keep = by_cause[cause] > 0
    values = np.minimum(np.cumsum(increments)[keep], 1.0)
    return CifCurve(times[keep], values)


def censoring_km(sample: SurvSample) -> StepFunction:
    """Kaplan-Meier estimate of the censoring survival function"""
    times, at_risk, _, censored = risk_table(sample)
    survival = np.cumprod(1.0 - censored / at_risk)
    keep = censored > 0
    return StepFunction(times[keep], survival[keep], 1.0)


def leaf_cif(sample: SurvSample, causes: List[int]) -> Dict[int, CifCurve]:
    """Per-cause leaf incidence: Nelson-Aalen for one cause, Aalen-Johansen otherwise"""
    if len(causes) == 1:
        return {causes[0]: nelson_aalen_cif(sample)}
    return {cause: aalen_johansen_cif(sample, cause) for cause in causes}
