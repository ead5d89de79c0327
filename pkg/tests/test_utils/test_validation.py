"""
Tests for dataset validation and predictor alignment.
"""

import numpy as np
import pytest

from src.models.data import FixedSchema, Hyperparams, MarkerSpec, OutcomeType
from src.models.tables import Outcome
from src.utils.audit import AuditAction
from src.utils.errors import (
    ComputationError,
    DataValidationError,
    InsufficientData,
    InvalidConfig,
    InvalidOutcome,
    MissingCause,
    MtryTooLarge,
    SchemaMismatch,
    UnknownCause,
    UnknownMarker,
)
from src.utils.validation import DatasetValidator, ValidationResult, build_predictors, validate_inputs
from tests.conftest import MARKERS, SCHEMA, build_tables


def survival_outcome(ids, event, cause=None):
    return Outcome(type=OutcomeType.SURVIVAL, subject_ids=ids, time=np.arange(1.0, len(ids) + 1),
                   event=np.asarray(event), cause=cause)


@pytest.fixture
def tables():
    ids, long, fixed, _, _ = build_tables(n_subjects=6)
    return ids, long, fixed


def specs():
    return [MarkerSpec(name=m) for m in MARKERS]


class TestValidateInputs:
    """Test cross-table validation"""

    def test_valid_numeric_dataset(self, tables):
        ids, long, fixed = tables
        outcome = Outcome(type=OutcomeType.NUMERIC, subject_ids=ids, y=np.arange(6.0))
        dataset = validate_inputs(long, fixed, outcome, specs(), SCHEMA, Hyperparams())
        assert dataset.n_subjects == 6
        assert dataset.P == 2
        assert dataset.Q == 1
        assert dataset.mtry == 2
        assert dataset.warnings == []

    def test_mtry_too_large(self, tables):
        ids, long, fixed = tables
        outcome = Outcome(type=OutcomeType.NUMERIC, subject_ids=ids, y=np.arange(6.0))
        with pytest.raises(MtryTooLarge):
            validate_inputs(long, fixed, outcome, specs(), SCHEMA, Hyperparams(mtry=4))

    def test_unknown_marker(self, tables):
        ids, long, fixed = tables
        outcome = Outcome(type=OutcomeType.NUMERIC, subject_ids=ids, y=np.arange(6.0))
        with pytest.raises(UnknownMarker):
            validate_inputs(long, fixed, outcome, [MarkerSpec(name="m9")], SCHEMA, Hyperparams())

    def test_duplicated_marker(self, tables):
        ids, long, fixed = tables
        outcome = Outcome(type=OutcomeType.NUMERIC, subject_ids=ids, y=np.arange(6.0))
        with pytest.raises(InvalidConfig):
            validate_inputs(long, fixed, outcome, specs() * 2, SCHEMA, Hyperparams())

    def test_no_predictors(self, tables):
        ids, _, _ = tables
        outcome = Outcome(type=OutcomeType.NUMERIC, subject_ids=ids, y=np.arange(6.0))
        with pytest.raises(InvalidConfig, match="no predictors declared"):
            validate_inputs(None, None, outcome, [], FixedSchema(), Hyperparams())

    def test_outcome_subject_without_predictors(self, tables):
        ids, long, fixed = tables
        outcome = Outcome(type=OutcomeType.NUMERIC, subject_ids=ids + ["ghost"], y=np.arange(7.0))
        with pytest.raises(InvalidOutcome):
            validate_inputs(long, fixed, outcome, specs(), SCHEMA, Hyperparams())

    def test_non_finite_numeric_outcome(self, tables):
        ids, long, fixed = tables
        y = np.arange(6.0)
        y[2] = np.inf
        with pytest.raises(InvalidOutcome):
            validate_inputs(long, fixed, Outcome(type=OutcomeType.NUMERIC, subject_ids=ids, y=y), specs(),
                            SCHEMA, Hyperparams())

    def test_failure_is_audited(self, tables, audit_logger):
        ids, long, fixed = tables
        outcome = Outcome(type=OutcomeType.NUMERIC, subject_ids=ids, y=np.arange(6.0))
        with pytest.raises(MtryTooLarge):
            DatasetValidator(audit_logger).validate_inputs(long, fixed, outcome, specs(), SCHEMA,
                                                           Hyperparams(mtry=9))
        records = audit_logger.get_audit_trail(action=AuditAction.VALIDATION_FAILED)
        assert len(records) == 1

    def test_subject_without_observations_warns(self, tables):
        ids, long, fixed = tables
        outcome = Outcome(type=OutcomeType.NUMERIC, subject_ids=ids, y=np.arange(6.0))
        keep = long.subject != ids[0]
        trimmed = long.__class__(markers=long.markers, subject=long.subject[keep], time=long.time[keep],
                                 values=long.values[keep])
        dataset = validate_inputs(trimmed, fixed, outcome, specs(), SCHEMA, Hyperparams())
        assert len(dataset.warnings) == 1
        assert len(dataset.predictors.subject_series(0, "m1")[0]) == 0


class TestSurvivalCauses:
    """Test resolution of the cause of interest"""

    def test_single_cause_is_resolved(self, tables):
        ids, long, fixed = tables
        dataset = validate_inputs(long, fixed, survival_outcome(ids, [1, 0, 1, 0, 1, 1]), specs(), SCHEMA,
                                  Hyperparams())
        assert dataset.outcome.causes == [1]
        assert dataset.outcome.cause == 1

    def test_competing_causes_need_a_cause(self, tables):
        ids, long, fixed = tables
        with pytest.raises(MissingCause):
            validate_inputs(long, fixed, survival_outcome(ids, [1, 2, 1, 0, 2, 1]), specs(), SCHEMA,
                            Hyperparams())

    def test_unknown_cause(self, tables):
        ids, long, fixed = tables
        with pytest.raises(UnknownCause):
            validate_inputs(long, fixed, survival_outcome(ids, [1, 2, 1, 0, 2, 1], cause=3), specs(), SCHEMA,
                            Hyperparams())

    def test_no_events(self, tables):
        ids, long, fixed = tables
        with pytest.raises(InvalidOutcome):
            validate_inputs(long, fixed, survival_outcome(ids, [0] * 6), specs(), SCHEMA, Hyperparams())


class TestBuildPredictors:
    """Test alignment of tables on a subject order"""

    def test_reordered_subjects(self, tables):
        ids, long, fixed = tables
        order = list(reversed(ids))
        data = build_predictors(order, long, fixed, specs(), SCHEMA)
        assert data.numeric[0, 0] == fixed.numeric[5, 0]
        times, values = data.subject_series(0, "m1")
        assert np.all(np.diff(times) > 0)
        assert np.array_equal(values, long.values[long.subject == ids[5], 0])

    def test_subject_absent_from_fixed_table(self, tables):
        ids, long, fixed = tables
        data = build_predictors(ids + ["new"], long, fixed, specs(), SCHEMA)
        assert np.isnan(data.numeric[6, 0])
        assert data.factor[6, 0] == -1

    def test_missing_marker_error_is_configurable(self, tables):
        ids, long, fixed = tables
        with pytest.raises(SchemaMismatch):
            build_predictors(ids, long, fixed, [MarkerSpec(name="m9")], SCHEMA, missing_marker_error=SchemaMismatch)


class TestValidationResult:

    def test_merge_and_raise(self):
        first = ValidationResult()
        first.add_warning("careful")
        second = ValidationResult()
        second.add_error(InvalidConfig, "bad")
        merged = first.merge(second)
        assert merged.is_valid is False
        assert merged.messages == ["InvalidConfig: bad"]
        with pytest.raises(InvalidConfig):
            merged.raise_if_invalid()


class TestErrorHierarchy:

    def test_validation_and_computation_families(self):
        assert issubclass(MtryTooLarge, DataValidationError)
        assert issubclass(MtryTooLarge, ValueError)
        assert issubclass(InsufficientData, ComputationError)
        assert issubclass(InsufficientData, RuntimeError)
