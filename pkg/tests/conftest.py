"""
Pytest configuration and fixtures for LongiForest tests.
"""

import numpy as np
import pytest

from src.models.data import (
    ColumnKind,
    FixedColumnSpec,
    FixedSchema,
    Hyperparams,
    MarkerSpec,
    OutcomeType,
)
from src.models.tables import FixedTable, LongitudinalTable, Outcome
from src.utils.audit import AuditLogger
from src.utils.validation import validate_inputs

MARKERS = ["m1"]
SCHEMA = FixedSchema(columns=[
    FixedColumnSpec(name="x1"),
    FixedColumnSpec(name="grp", kind=ColumnKind.CATEGORICAL, levels=["a", "b", "c"]),
])


def build_tables(n_subjects: int = 30, seed: int = 0, n_visits: int = 4):
    """Longitudinal and fixed tables plus the latent random intercepts"""
    rng = np.random.default_rng(seed)
    ids = [f"s{i:03d}" for i in range(n_subjects)]
    b0 = rng.normal(0.0, 1.0, n_subjects)
    b1 = rng.normal(0.0, 0.5, n_subjects)
    times = np.tile(np.arange(n_visits, dtype=float), n_subjects) + rng.uniform(0.0, 0.2, n_subjects * n_visits)
    subject_b0 = np.repeat(b0, n_visits)
    subject_b1 = np.repeat(b1, n_visits)
    values = 1.0 + subject_b0 + (0.5 + subject_b1) * times + rng.normal(0.0, 0.3, n_subjects * n_visits)

    long = LongitudinalTable(
        markers=list(MARKERS),
        subject=np.repeat(np.array(ids, dtype=object), n_visits),
        time=times,
        values=values[:, None],
    )
    fixed = FixedTable(
        schema=SCHEMA,
        subject_ids=ids,
        numeric=rng.normal(0.0, 1.0, (n_subjects, 1)),
        factor=rng.integers(0, 3, (n_subjects, 1)),
    )
    return ids, long, fixed, b0, rng


def build_dataset(outcome_type: OutcomeType = OutcomeType.NUMERIC, n_subjects: int = 30, seed: int = 0,
                  n_causes: int = 1, **hyperparams):
    """Small validated dataset with one marker, one numeric and one factor column"""
    ids, long, fixed, b0, rng = build_tables(n_subjects, seed)
    x1 = fixed.numeric[:, 0]
    if outcome_type == OutcomeType.NUMERIC:
        outcome = Outcome(type=outcome_type, subject_ids=ids,
                          y=2.0 * b0 + x1 + rng.normal(0.0, 0.5, n_subjects))
    elif outcome_type == OutcomeType.FACTOR:
        outcome = Outcome(type=outcome_type, subject_ids=ids, levels=["no", "yes"],
                          y=(b0 > 0).astype(float))
    else:
        event_time = rng.exponential(np.exp(-b0)) + 0.01
        censor_time = rng.uniform(0.5, 3.0, n_subjects)
        time = np.round(np.minimum(event_time, censor_time), 6)
        event = (event_time <= censor_time).astype(int)
        cause = None
        if n_causes > 1:
            event = np.where(event > 0, rng.integers(1, n_causes + 1, n_subjects), 0)
            event[:n_causes] = np.arange(1, n_causes + 1)
            cause = 1
        outcome = Outcome(type=outcome_type, subject_ids=ids, time=time, event=event, cause=cause)

    hp = Hyperparams(**{"ntree": 5, "seed": 7, **hyperparams})
    return validate_inputs(long, fixed, outcome, [MarkerSpec(name=m) for m in MARKERS], SCHEMA, hp)


@pytest.fixture
def audit_logger():
    """Fresh audit logger"""
    return AuditLogger()


@pytest.fixture
def numeric_dataset():
    return build_dataset(OutcomeType.NUMERIC)


@pytest.fixture
def factor_dataset():
    return build_dataset(OutcomeType.FACTOR)


@pytest.fixture
def survival_dataset():
    return build_dataset(OutcomeType.SURVIVAL, n_subjects=40, minsplit=2)


@pytest.fixture
def competing_dataset():
    return build_dataset(OutcomeType.SURVIVAL, n_subjects=40, n_causes=2)
