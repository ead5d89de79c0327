"""
Tests for table ingestion and emission.
"""

from io import StringIO

import numpy as np
import pytest

from src.ingestion.processors import TableProcessor, format_real, parse_reals, read_table
from src.models.data import ColumnKind, FixedColumnSpec, FixedSchema, OutcomeSpec, OutcomeType
from src.utils.audit import AuditAction, AuditSeverity
from src.utils.errors import (
    DuplicateMeasurement,
    DuplicateSubject,
    EmptyTable,
    InvalidOutcome,
    MissingColumn,
    UnknownLevel,
    UnparseableValue,
)

SCHEMA = FixedSchema(columns=[
    FixedColumnSpec(name="age"),
    FixedColumnSpec(name="sex", kind=ColumnKind.CATEGORICAL, levels=["F", "M"]),
])


@pytest.fixture
def processor(audit_logger):
    return TableProcessor(audit_logger)


class TestReadTable:
    """Test raw delimited reading"""

    def test_na_and_empty_cells_are_missing(self):
        frame = read_table(StringIO("id,a,b\n1,NA,\n2,3,x\n"))
        assert frame["a"].isna().tolist() == [True, False]
        assert frame["b"].isna().tolist() == [True, False]

    def test_empty_inputs(self):
        with pytest.raises(EmptyTable):
            read_table(StringIO(""))
        with pytest.raises(EmptyTable):
            read_table(StringIO("id,a\n"))

    def test_unparseable_number(self):
        frame = read_table(StringIO("a\n1.5\nabc\n"))
        with pytest.raises(UnparseableValue):
            parse_reals(frame["a"], "a")

    def test_invalid_utf8_is_unparseable(self, tmp_path):
        path = tmp_path / "long.csv"
        path.write_bytes(b"id,time,m1\np1,0,\xff\xfe\n")
        with pytest.raises(UnparseableValue, match="UTF-8"):
            TableProcessor().ingest_longitudinal(str(path), "id", "time", ["m1"])

    def test_ragged_rows_are_unparseable(self):
        with pytest.raises(UnparseableValue, match="malformed"):
            read_table(StringIO("a,b\n1,2\n3,4,5\n"))

    def test_format_real(self):
        assert format_real(float("nan")) == "NA"
        assert float(format_real(0.1 + 0.2)) == 0.1 + 0.2


class TestIngestLongitudinal:
    """Test repeated-measure ingestion"""

    def test_rows_are_sorted_by_subject_then_time(self, processor):
        text = "id,time,m1,m2\nb,2,1,2\na,1,3,4\nb,0.5,5,6\na,0,7,8\n"
        table = processor.ingest_longitudinal(StringIO(text), "id", "time", ["m1", "m2"])
        assert table.subject.tolist() == ["a", "a", "b", "b"]
        assert table.time.tolist() == [0.0, 1.0, 0.5, 2.0]
        assert table.values[:, 0].tolist() == [7.0, 3.0, 5.0, 1.0]
        assert table.subject_ids == ["a", "b"]

    def test_rows_at_the_same_time_merge_marker_wise(self, processor):
        text = "id,time,m1,m2\na,1,3,NA\na,1,NA,4\n"
        table = processor.ingest_longitudinal(StringIO(text), "id", "time", ["m1", "m2"])
        assert len(table.time) == 1
        assert table.values.tolist() == [[3.0, 4.0]]

    def test_duplicate_measurement(self, processor):
        text = "id,time,m1\na,1,3\na,1,4\n"
        with pytest.raises(DuplicateMeasurement):
            processor.ingest_longitudinal(StringIO(text), "id", "time", ["m1"])

    def test_rows_without_time_are_dropped(self, processor, audit_logger):
        text = "id,time,m1\na,NA,3\na,1,4\nb,,5\n"
        table = processor.ingest_longitudinal(StringIO(text), "id", "time", ["m1"])
        assert table.time.tolist() == [1.0]
        record = audit_logger.get_audit_trail(action=AuditAction.DATASET_INGESTED)[-1]
        assert record.details["n_dropped"] == 2
        assert record.severity == AuditSeverity.WARNING

    def test_negative_time(self, processor):
        with pytest.raises(UnparseableValue):
            processor.ingest_longitudinal(StringIO("id,time,m1\na,-1,3\n"), "id", "time", ["m1"])

    def test_missing_marker_column(self, processor):
        with pytest.raises(MissingColumn):
            processor.ingest_longitudinal(StringIO("id,time,m1\na,1,3\n"), "id", "time", ["m1", "m2"])

    def test_separator(self, audit_logger):
        table = TableProcessor(audit_logger, sep=";").ingest_longitudinal(
            StringIO("id;time;m1\na;1;3\n"), "id", "time", ["m1"])
        assert table.values.tolist() == [[3.0]]

    def test_ingestion_is_audited(self, processor, audit_logger):
        processor.ingest_longitudinal(StringIO("id,time,m1\na,1,3\n"), "id", "time", ["m1"])
        assert audit_logger.get_audit_trail(action=AuditAction.DATASET_INGESTED)


class TestIngestFixed:
    """Test time-fixed ingestion"""

    def test_levels_become_codes(self, processor):
        table = processor.ingest_fixed(StringIO("id,age,sex\n1,50,M\n2,NA,F\n3,61,NA\n"), "id", SCHEMA)
        assert table.subject_ids == ["1", "2", "3"]
        assert np.isnan(table.numeric[1, 0])
        assert table.factor[:, 0].tolist() == [1, 0, -1]

    def test_unknown_level(self, processor):
        with pytest.raises(UnknownLevel):
            processor.ingest_fixed(StringIO("id,age,sex\n1,50,X\n"), "id", SCHEMA)

    def test_duplicate_subject(self, processor):
        with pytest.raises(DuplicateSubject):
            processor.ingest_fixed(StringIO("id,age,sex\n1,50,M\n1,51,F\n"), "id", SCHEMA)

    def test_missing_declared_column(self, processor):
        with pytest.raises(MissingColumn):
            processor.ingest_fixed(StringIO("id,age\n1,50\n"), "id", SCHEMA)


class TestIngestOutcome:
    """Test outcome ingestion"""

    def test_numeric(self, processor):
        outcome = processor.ingest_outcome(StringIO("id,y\na,1.5\nb,2\n"), "id",
                                           OutcomeSpec(type=OutcomeType.NUMERIC))
        assert outcome.y.tolist() == [1.5, 2.0]

    def test_numeric_missing_value(self, processor):
        with pytest.raises(InvalidOutcome):
            processor.ingest_outcome(StringIO("id,y\na,NA\nb,2\n"), "id", OutcomeSpec(type=OutcomeType.NUMERIC))

    def test_factor_levels_default_to_sorted_values(self, processor):
        outcome = processor.ingest_outcome(StringIO("id,y\na,yes\nb,no\nc,yes\n"), "id",
                                           OutcomeSpec(type=OutcomeType.FACTOR))
        assert outcome.levels == ["no", "yes"]
        assert outcome.y.tolist() == [1.0, 0.0, 1.0]

    def test_factor_unknown_level(self, processor):
        with pytest.raises(UnknownLevel):
            processor.ingest_outcome(StringIO("id,y\na,maybe\nb,no\n"), "id",
                                     OutcomeSpec(type=OutcomeType.FACTOR, levels=["no", "yes"]))

    def test_factor_needs_two_levels(self, processor):
        with pytest.raises(InvalidOutcome):
            processor.ingest_outcome(StringIO("id,y\na,no\nb,no\n"), "id", OutcomeSpec(type=OutcomeType.FACTOR))

    def test_survival_causes(self, processor):
        outcome = processor.ingest_outcome(StringIO("id,time,event\na,1.5,2\nb,2,0\nc,3,1\n"), "id",
                                           OutcomeSpec(type=OutcomeType.SURVIVAL))
        assert outcome.causes == [1, 2]
        assert outcome.event.tolist() == [2, 0, 1]

    @pytest.mark.parametrize("row", ["a,0,1", "a,1,-1", "a,1,1.5"])
    def test_invalid_survival_rows(self, processor, row):
        with pytest.raises(InvalidOutcome):
            processor.ingest_outcome(StringIO(f"id,time,event\n{row}\n"), "id",
                                     OutcomeSpec(type=OutcomeType.SURVIVAL))

    def test_duplicate_outcome(self, processor):
        with pytest.raises(DuplicateSubject):
            processor.ingest_outcome(StringIO("id,y\na,1\na,2\n"), "id", OutcomeSpec(type=OutcomeType.NUMERIC))


class TestEmit:
    """Test that emitted tables read back unchanged"""

    def test_longitudinal(self, processor):
        text = "id,time,m1\na,0,0.1\na,1.25,NA\nb,0.3333333333333333,2\n"
        table = processor.ingest_longitudinal(StringIO(text), "id", "time", ["m1"])
        buffer = StringIO()
        processor.emit_longitudinal(table, buffer)
        again = processor.ingest_longitudinal(StringIO(buffer.getvalue()), "id", "time", ["m1"])
        assert again.subject.tolist() == table.subject.tolist()
        assert again.time.tolist() == table.time.tolist()
        assert np.array_equal(again.values, table.values, equal_nan=True)

    def test_fixed_and_survival_outcome(self, processor):
        fixed = processor.ingest_fixed(StringIO("id,age,sex\n1,50.5,M\n2,NA,NA\n"), "id", SCHEMA)
        buffer = StringIO()
        processor.emit_fixed(fixed, buffer)
        again = processor.ingest_fixed(StringIO(buffer.getvalue()), "id", SCHEMA)
        assert again.factor.tolist() == fixed.factor.tolist()
        assert np.array_equal(again.numeric, fixed.numeric, equal_nan=True)

        spec = OutcomeSpec(type=OutcomeType.SURVIVAL)
        outcome = processor.ingest_outcome(StringIO("id,time,event\n1,2.5,1\n2,4,0\n"), "id", spec)
        buffer = StringIO()
        processor.emit_outcome(outcome, buffer, spec)
        assert buffer.getvalue().splitlines() == ["id,time,event", "1,2.5,1", "2,4.0,0"]
