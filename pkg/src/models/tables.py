"""
Numeric tables for LongiForest

Array-backed containers produced by ingestion and validation. They are
immutable once built and are shared read-only by concurrent tree builders.
"""

import hashlib
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .data import FixedSchema, Hyperparams, MarkerSpec, OutcomeType, PredictorKind


@dataclass(frozen=True)
class LongitudinalTable:
    """Long-format repeated measures sorted by subject then time"""
    markers: List[str]
    subject: np.ndarray
    time: np.ndarray
    values: np.ndarray

    @property
    def subject_ids(self) -> List[str]:
        return list(dict.fromkeys(self.subject.tolist()))

    def series(self, subject_id: str, marker: str) -> Tuple[np.ndarray, np.ndarray]:
        """Return the non-missing (time, value) series of one subject"""
        column = self.markers.index(marker)
        rows = self.subject == subject_id
        values = self.values[rows, column]
        keep = ~np.isnan(values)
        return self.time[rows][keep], values[keep]


@dataclass(frozen=True)
class FixedTable:
    """Wide-format time-fixed predictors, one row per subject"""
    schema: FixedSchema
    subject_ids: List[str]
    numeric: np.ndarray
    factor: np.ndarray


@dataclass(frozen=True)
class Outcome:
    """Outcome of one of the three modes"""
    type: OutcomeType
    subject_ids: List[str]
    y: Optional[np.ndarray] = None
    levels: Optional[List[str]] = None
    time: Optional[np.ndarray] = None
    event: Optional[np.ndarray] = None
    causes: Optional[List[int]] = None
    cause: Optional[int] = None

    def take(self, rows: np.ndarray) -> "Outcome":
        """Return the outcome restricted to the given row positions"""
        ids = [self.subject_ids[i] for i in rows]
        if self.type == OutcomeType.SURVIVAL:
            return replace(self, subject_ids=ids, time=self.time[rows], event=self.event[rows])
        return replace(self, subject_ids=ids, y=self.y[rows])


@dataclass(frozen=True)
class MarkerObservations:
    """Non-missing observations of one marker, indexed by subject row"""
    subject_index: np.ndarray
    time: np.ndarray
    value: np.ndarray


@dataclass(frozen=True)
class Predictor:
    """One candidate predictor in declared order"""
    kind: PredictorKind
    index: int
    name: str


@dataclass(frozen=True)
class PredictorData:
    """Predictor values aligned on a subject order"""
    subject_ids: List[str]
    marker_specs: List[MarkerSpec]
    observations: Dict[str, MarkerObservations]
    numeric_names: List[str]
    numeric: np.ndarray
    factor_names: List[str]
    factor_levels: Dict[str, List[str]]
    factor: np.ndarray
    stats_cache: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    @property
    def marker_names(self) -> List[str]:
        return [spec.name for spec in self.marker_specs]

    @property
    def predictors(self) -> List[Predictor]:
        """Longitudinal markers first, then numeric, then factor columns"""
        items = [Predictor(PredictorKind.LONGITUDINAL, i, name) for i, name in enumerate(self.marker_names)]
        items += [Predictor(PredictorKind.NUMERIC, i, name) for i, name in enumerate(self.numeric_names)]
        items += [Predictor(PredictorKind.FACTOR, i, name) for i, name in enumerate(self.factor_names)]
        return items

    def predictor(self, name: str) -> Predictor:
        for item in self.predictors:
            if item.name == name:
                return item
        raise KeyError(name)

    def subject_series(self, row: int, marker: str) -> Tuple[np.ndarray, np.ndarray]:
        obs = self.observations[marker]
        keep = obs.subject_index == row
        return obs.time[keep], obs.value[keep]

    def with_observations(self, marker: str, observations: MarkerObservations) -> "PredictorData":
        """Return a copy with one marker's observations replaced"""
        updated = dict(self.observations)
        updated[marker] = observations
        cache = {k: v for k, v in self.stats_cache.items() if k != marker}
        return replace(self, observations=updated, stats_cache=cache)

    def with_numeric(self, column: int, values: np.ndarray) -> "PredictorData":
        numeric = self.numeric.copy()
        numeric[:, column] = values
        return replace(self, numeric=numeric, stats_cache=dict(self.stats_cache))

    def with_factor(self, column: int, codes: np.ndarray) -> "PredictorData":
        factor = self.factor.copy()
        factor[:, column] = codes
        return replace(self, factor=factor, stats_cache=dict(self.stats_cache))

    def up_to(self, landmark: Optional[float]) -> "PredictorData":
        """Return a copy keeping only observations made at or before the landmark"""
        if landmark is None:
            return self
        filtered = {}
        for name, obs in self.observations.items():
            keep = obs.time <= landmark
            filtered[name] = MarkerObservations(obs.subject_index[keep], obs.time[keep], obs.value[keep])
        return replace(self, observations=filtered, stats_cache={})

    def subset(self, rows: np.ndarray) -> "PredictorData":
        """Return a copy restricted to the given unique rows, renumbered"""
        rows = np.asarray(rows, dtype=int)
        position = np.full(self.n_subjects, -1, dtype=int)
        position[rows] = np.arange(len(rows))
        observations = {}
        for name, obs in self.observations.items():
            new_index = position[obs.subject_index]
            keep = new_index >= 0
            order = np.lexsort((obs.time[keep], new_index[keep]))
            observations[name] = MarkerObservations(
                new_index[keep][order], obs.time[keep][order], obs.value[keep][order]
            )
        return replace(
            self,
            subject_ids=[self.subject_ids[i] for i in rows],
            observations=observations,
            numeric=self.numeric[rows],
            factor=self.factor[rows],
            stats_cache={},
        )


@dataclass(frozen=True)
class ValidatedDataset:
    """Predictors and outcome aligned on the outcome's subject order"""
    predictors: PredictorData
    outcome: Outcome
    schema: FixedSchema
    hyperparams: Hyperparams
    mtry: int
    warnings: List[str] = field(default_factory=list)

    @property
    def subject_ids(self) -> List[str]:
        return self.predictors.subject_ids

    @property
    def n_subjects(self) -> int:
        return self.predictors.n_subjects

    @property
    def Q(self) -> int:
        return len(self.predictors.marker_specs)

    @property
    def P(self) -> int:
        return len(self.predictors.numeric_names) + len(self.predictors.factor_names)

    def content_hash(self) -> str:
        """SHA-256 over subject ids, observations, fixed values and outcome"""
        digest = hashlib.sha256()
        digest.update("\x1f".join(self.subject_ids).encode("utf-8"))
        for spec in self.predictors.marker_specs:
            obs = self.predictors.observations[spec.name]
            digest.update(spec.name.encode("utf-8"))
            for array in (obs.subject_index.astype(np.int64), obs.time, obs.value):
                digest.update(np.ascontiguousarray(array).tobytes())
        digest.update(np.ascontiguousarray(self.predictors.numeric, dtype=float).tobytes())
        digest.update(np.ascontiguousarray(self.predictors.factor, dtype=np.int64).tobytes())
        outcome = self.outcome
        if outcome.type == OutcomeType.SURVIVAL:
            digest.update(np.ascontiguousarray(outcome.time, dtype=float).tobytes())
            digest.update(np.ascontiguousarray(outcome.event, dtype=np.int64).tobytes())
        else:
            digest.update(np.ascontiguousarray(outcome.y, dtype=float).tobytes())
        return digest.hexdigest()
