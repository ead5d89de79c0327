"""
Dataset Validation for LongiForest

Cross-table checks that turn ingested tables into a ValidatedDataset:
marker presence, outcome coverage, cause resolution and mtry bounds.
"""

from typing import List, Optional, Sequence, Tuple, Type

import numpy as np

from ..models.data import FixedSchema, Hyperparams, MarkerSpec, OutcomeType
from ..models.tables import (
    FixedTable,
    LongitudinalTable,
    MarkerObservations,
    Outcome,
    PredictorData,
    ValidatedDataset,
)
from .audit import AuditLogger
from .errors import (
    DataValidationError,
    InvalidConfig,
    InvalidOutcome,
    MissingCause,
    MtryTooLarge,
    SchemaMismatch,
    UnknownCause,
    UnknownMarker,
)


class ValidationResult:
    """Validation result with named errors and warnings"""

    def __init__(self, is_valid: bool = True, errors: List[Tuple[Type[DataValidationError], str]] = None,
                 warnings: List[str] = None):
        self.is_valid = is_valid
        self.errors = errors or []
        self.warnings = warnings or []

    def add_error(self, error_type: Type[DataValidationError], message: str) -> None:
        """Add validation error"""
        self.errors.append((error_type, message))
        self.is_valid = False

    def add_warning(self, warning: str) -> None:
        """Add validation warning"""
        self.warnings.append(warning)

    def merge(self, other: 'ValidationResult') -> 'ValidationResult':
        """Merge with another validation result"""
        return ValidationResult(
            is_valid=self.is_valid and other.is_valid,
            errors=self.errors + other.errors,
            warnings=self.warnings + other.warnings
        )

    @property
    def messages(self) -> List[str]:
        return [f"{error_type.__name__}: {message}" for error_type, message in self.errors]

    def raise_if_invalid(self) -> None:
        """Raise the first recorded error"""
        if self.errors:
            error_type, message = self.errors[0]
            raise error_type(message)


def build_predictors(subject_ids: Sequence[str], long: Optional[LongitudinalTable],
                     fixed: Optional[FixedTable], marker_specs: Sequence[MarkerSpec],
                     schema: FixedSchema, missing_marker_error: Type[DataValidationError] = UnknownMarker
                     ) -> PredictorData:
    """Align longitudinal and fixed tables on a subject order.

    Subjects absent from the fixed table get missing values; subjects
    without observations of a marker get an empty series.
    """
    subject_ids = list(subject_ids)
    position = {sid: i for i, sid in enumerate(subject_ids)}
    available = long.markers if long is not None else []

    observations = {}
    for spec in marker_specs:
        if spec.name not in available:
            raise missing_marker_error(f"marker {spec.name} is not a longitudinal column")
        column = long.markers.index(spec.name)
        index = np.array([position.get(sid, -1) for sid in long.subject], dtype=int)
        values = long.values[:, column]
        keep = (index >= 0) & ~np.isnan(values)
        order = np.lexsort((long.time[keep], index[keep]))
        observations[spec.name] = MarkerObservations(index[keep][order], long.time[keep][order],
                                                     values[keep][order])

    n = len(subject_ids)
    numeric = np.full((n, len(schema.numeric_names)), np.nan)
    factor = np.full((n, len(schema.factor_names)), -1, dtype=int)
    if fixed is not None:
        if fixed.schema.numeric_names != schema.numeric_names or fixed.schema.factor_names != schema.factor_names:
            raise SchemaMismatch("fixed table columns differ from the declared schema")
        rows = [(position[sid], i) for i, sid in enumerate(fixed.subject_ids) if sid in position]
        if rows:
            target, source = map(list, zip(*rows))
            numeric[target] = fixed.numeric[source]
            factor[target] = fixed.factor[source]

    return PredictorData(
        subject_ids=subject_ids,
        marker_specs=list(marker_specs),
        observations=observations,
        numeric_names=schema.numeric_names,
        numeric=numeric,
        factor_names=schema.factor_names,
        factor_levels=schema.factor_levels,
        factor=factor,
    )


class DatasetValidator:
    """Validation of ingested tables against the model specification"""

    def __init__(self, audit_logger: Optional[AuditLogger] = None):
        self.audit_logger = audit_logger or AuditLogger()

    def validate_outcome(self, outcome: Outcome) -> Tuple[Outcome, ValidationResult]:
        """Check outcome invariants and resolve the cause of interest"""
        result = ValidationResult()
        if outcome.type == OutcomeType.FACTOR:
            if len(outcome.levels or []) < 2:
                result.add_error(InvalidOutcome, "factor outcomes need at least two levels")
            return outcome, result
        if outcome.type == OutcomeType.NUMERIC:
            if not np.all(np.isfinite(outcome.y)):
                result.add_error(InvalidOutcome, "numeric outcome must be finite")
            return outcome, result

        causes = sorted(int(c) for c in np.unique(outcome.event) if c > 0)
        if not causes:
            result.add_error(InvalidOutcome, "survival outcome has no observed events")
            return outcome, result
        cause = outcome.cause
        if cause is None:
            if len(causes) > 1:
                result.add_error(MissingCause, f"competing causes {causes} present, cause of interest required")
                return outcome, result
            cause = causes[0]
        elif cause not in causes:
            result.add_error(UnknownCause, f"cause {cause} not among observed causes {causes}")
            return outcome, result
        return Outcome(type=outcome.type, subject_ids=outcome.subject_ids, time=outcome.time,
                       event=outcome.event, causes=causes, cause=cause), result

    def validate_inputs(self, long: Optional[LongitudinalTable], fixed: Optional[FixedTable],
                        outcome: Outcome, marker_specs: Sequence[MarkerSpec], schema: FixedSchema,
                        hyperparams: Hyperparams) -> ValidatedDataset:
        """Assert every type invariant and build the aligned dataset"""
        result = ValidationResult()
        available = long.markers if long is not None else []
        for spec in marker_specs:
            if spec.name not in available:
                result.add_error(UnknownMarker, f"marker {spec.name} is not a longitudinal column")
        if len({spec.name for spec in marker_specs}) != len(marker_specs):
            result.add_error(InvalidConfig, "markers declared more than once")

        n_predictors = len(marker_specs) + len(schema.numeric_names) + len(schema.factor_names)
        if n_predictors == 0:
            result.add_error(InvalidConfig, "no predictors declared")

        known = set(fixed.subject_ids if fixed is not None else [])
        known.update(long.subject_ids if long is not None else [])
        unknown = [sid for sid in outcome.subject_ids if sid not in known]
        if unknown:
            result.add_error(InvalidOutcome, f"{len(unknown)} outcome subjects have no predictor data, "
                                             f"first: {unknown[0]}")

        outcome, outcome_result = self.validate_outcome(outcome)
        result = result.merge(outcome_result)

        mtry = hyperparams.resolved_mtry(n_predictors)
        if n_predictors and mtry > n_predictors:
            result.add_error(MtryTooLarge, f"mtry={mtry} exceeds the number of predictors ({n_predictors})")

        if result.is_valid:
            predictors = build_predictors(outcome.subject_ids, long, fixed, marker_specs, schema)
            for spec in marker_specs:
                observed = np.unique(predictors.observations[spec.name].subject_index)
                missing = predictors.n_subjects - len(observed)
                if missing:
                    result.add_warning(f"{missing} subjects have no observations of {spec.name}")

        self.audit_logger.log_dataset_validated(result.is_valid, result.messages or None,
                                                result.warnings or None,
                                                {"n_subjects": len(outcome.subject_ids), "n_predictors": n_predictors})
        result.raise_if_invalid()

        return ValidatedDataset(
            predictors=predictors,
            outcome=outcome,
            schema=schema,
            hyperparams=hyperparams,
            mtry=mtry,
            warnings=result.warnings,
        )


def validate_inputs(long: Optional[LongitudinalTable], fixed: Optional[FixedTable], outcome: Outcome,
                    marker_specs: Sequence[MarkerSpec], schema: FixedSchema,
                    hyperparams: Hyperparams) -> ValidatedDataset:
    """Validate tables without keeping an audit trail"""
    return DatasetValidator().validate_inputs(long, fixed, outcome, marker_specs, schema, hyperparams)
