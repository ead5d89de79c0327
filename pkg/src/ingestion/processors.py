"""
Table Processing for LongiForest

Readers turning delimited text into typed tables, and writers emitting them
back in the same layout. Cells reading "NA" or left empty are missing.
"""

import math
from typing import List, Optional, Sequence, TextIO, Union

import numpy as np
import pandas as pd
from loguru import logger

from ..models.data import ColumnKind, FixedSchema, OutcomeSpec, OutcomeType
from ..models.tables import FixedTable, LongitudinalTable, Outcome
from ..utils.audit import AuditLogger
from ..utils.errors import (
    DuplicateMeasurement,
    DuplicateSubject,
    EmptyTable,
    InvalidOutcome,
    MissingColumn,
    UnknownLevel,
    UnparseableValue,
)

Source = Union[str, TextIO]
NA_VALUES = ["NA", ""]


def read_table(source: Source, sep: str = ",") -> pd.DataFrame:
    """Read a delimited file as strings, missing cells as NaN"""
    try:
        frame = pd.read_csv(source, sep=sep, dtype=str, keep_default_na=False, na_values=NA_VALUES,
                            encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyTable("no header row")
    except UnicodeDecodeError as exc:
        raise UnparseableValue(f"input is not valid UTF-8 text: {exc.reason} at byte {exc.start}")
    except pd.errors.ParserError as exc:
        raise UnparseableValue(f"malformed delimited text: {exc}")
    if frame.empty:
        raise EmptyTable("no data rows")
    return frame


def _require(frame: pd.DataFrame, columns: Sequence[str]) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise MissingColumn(f"missing columns: {', '.join(missing)}")


def parse_reals(values: pd.Series, column: str) -> np.ndarray:
    """Parse a string column into floats, NaN where missing"""
    try:
        return values.astype(float).to_numpy(dtype=float)
    except (TypeError, ValueError):
        for value in values.dropna():
            try:
                float(value)
            except ValueError:
                raise UnparseableValue(f"column {column}: cannot parse {value!r} as a number")
        raise UnparseableValue(f"column {column}: cannot parse values as numbers")


def _ids(frame: pd.DataFrame, id_column: str) -> List[str]:
    if frame[id_column].isna().any():
        raise UnparseableValue(f"column {id_column}: missing subject id")
    return frame[id_column].astype(str).tolist()


def format_real(value: float) -> str:
    """Shortest text that parses back to the same float"""
    return "NA" if value is None or math.isnan(value) else repr(float(value))


class TableProcessor:
    """Ingestion and emission of the delimited input tables"""

    def __init__(self, audit_logger: Optional[AuditLogger] = None, sep: str = ","):
        self.audit_logger = audit_logger or AuditLogger()
        self.sep = sep

    def ingest_longitudinal(self, source: Source, id_column: str, time_column: str,
                            markers: Sequence[str]) -> LongitudinalTable:
        """Read repeated measures; rows sharing (id, time) are merged marker-wise"""
        frame = read_table(source, self.sep)
        _require(frame, [id_column, time_column, *markers])
        frame = frame.assign(**{id_column: _ids(frame, id_column)})

        time = parse_reals(frame[time_column], time_column)
        keep = ~np.isnan(time)
        n_dropped = int((~keep).sum())
        if n_dropped:
            logger.warning("Dropped {} longitudinal rows without an observation time", n_dropped)
        frame, time = frame[keep], time[keep]
        if frame.empty:
            raise EmptyTable("no rows with an observation time")
        if not np.all(np.isfinite(time)) or np.any(time < 0):
            raise UnparseableValue(f"column {time_column}: times must be finite and non-negative")

        values = np.column_stack([parse_reals(frame[m], m) for m in markers]) if markers \
            else np.zeros((len(frame), 0))
        long = pd.DataFrame(values, columns=list(markers))
        long.insert(0, "_time", time)
        long.insert(0, "_id", frame[id_column].to_numpy())

        grouped = long.groupby(["_id", "_time"], sort=True)
        if markers:
            repeated = grouped[list(markers)].count() > 1
            if repeated.to_numpy().any():
                row, col = np.argwhere(repeated.to_numpy())[0]
                sid, t = repeated.index[row]
                raise DuplicateMeasurement(f"subject {sid} has two {repeated.columns[col]} values at time {t}")
        merged = grouped.first().reset_index() if markers else long.drop_duplicates(["_id", "_time"])
        merged = merged.sort_values(["_id", "_time"], kind="mergesort")

        table = LongitudinalTable(
            markers=list(markers),
            subject=merged["_id"].to_numpy(dtype=object),
            time=merged["_time"].to_numpy(dtype=float),
            values=merged[list(markers)].to_numpy(dtype=float) if markers else np.zeros((len(merged), 0)),
        )
        self.audit_logger.log_dataset_ingested("longitudinal", len(table.subject_ids), len(merged), n_dropped)
        return table

    def ingest_fixed(self, source: Source, id_column: str, schema: FixedSchema) -> FixedTable:
        """Read one row per subject; categorical values become level indices"""
        frame = read_table(source, self.sep)
        _require(frame, [id_column, *[c.name for c in schema.columns]])
        ids = _ids(frame, id_column)
        duplicated = pd.Series(ids)[pd.Series(ids).duplicated()]
        if not duplicated.empty:
            raise DuplicateSubject(f"subject {duplicated.iloc[0]} appears more than once")

        numeric = np.column_stack([parse_reals(frame[name], name) for name in schema.numeric_names]) \
            if schema.numeric_names else np.zeros((len(ids), 0))
        factor = np.full((len(ids), len(schema.factor_names)), -1, dtype=int)
        for j, column in enumerate(c for c in schema.columns if c.kind == ColumnKind.CATEGORICAL):
            code_of = {level: k for k, level in enumerate(column.levels)}
            for i, value in enumerate(frame[column.name]):
                if pd.isna(value):
                    continue
                if value not in code_of:
                    raise UnknownLevel(f"column {column.name}: level {value!r} not in {column.levels}")
                factor[i, j] = code_of[value]

        self.audit_logger.log_dataset_ingested("fixed", len(ids), len(ids))
        return FixedTable(schema=schema, subject_ids=ids, numeric=numeric, factor=factor)

    def ingest_outcome(self, source: Source, id_column: str, spec: OutcomeSpec) -> Outcome:
        """Read the per-subject outcome in the declared mode"""
        frame = read_table(source, self.sep)
        ids = _ids(frame, id_column) if id_column in frame.columns else None
        if ids is None:
            raise MissingColumn(f"missing columns: {id_column}")
        duplicated = pd.Series(ids)[pd.Series(ids).duplicated()]
        if not duplicated.empty:
            raise DuplicateSubject(f"subject {duplicated.iloc[0]} has more than one outcome")

        if spec.type == OutcomeType.SURVIVAL:
            _require(frame, [spec.time_column, spec.event_column])
            time = parse_reals(frame[spec.time_column], spec.time_column)
            event = parse_reals(frame[spec.event_column], spec.event_column)
            if np.any(~np.isfinite(time)) or np.any(time <= 0):
                raise InvalidOutcome("survival times must be finite and positive")
            if np.any(~np.isfinite(event)) or np.any(event < 0) or np.any(event != np.round(event)):
                raise InvalidOutcome("event codes must be non-negative integers")
            event = event.astype(int)
            causes = sorted(int(c) for c in np.unique(event) if c > 0)
            outcome = Outcome(type=spec.type, subject_ids=ids, time=time, event=event,
                              causes=causes, cause=spec.cause)
        elif spec.type == OutcomeType.NUMERIC:
            _require(frame, [spec.column])
            y = parse_reals(frame[spec.column], spec.column)
            if np.any(np.isnan(y)):
                raise InvalidOutcome("numeric outcome has missing values")
            outcome = Outcome(type=spec.type, subject_ids=ids, y=y)
        else:
            _require(frame, [spec.column])
            raw = frame[spec.column]
            if raw.isna().any():
                raise InvalidOutcome("factor outcome has missing values")
            levels = list(spec.levels) if spec.levels else sorted(raw.unique().tolist())
            if len(levels) < 2:
                raise InvalidOutcome("factor outcomes need at least two levels")
            code_of = {level: k for k, level in enumerate(levels)}
            unknown = [value for value in raw if value not in code_of]
            if unknown:
                raise UnknownLevel(f"outcome level {unknown[0]!r} not in {levels}")
            outcome = Outcome(type=spec.type, subject_ids=ids, levels=levels,
                              y=np.array([code_of[value] for value in raw], dtype=float))

        self.audit_logger.log_dataset_ingested("outcome", len(ids), len(ids))
        return outcome

    # Emission

    def emit_longitudinal(self, table: LongitudinalTable, target: Source, id_column: str = "id",
                          time_column: str = "time") -> None:
        frame = pd.DataFrame({id_column: table.subject, time_column: [format_real(t) for t in table.time]})
        for j, marker in enumerate(table.markers):
            frame[marker] = [format_real(v) for v in table.values[:, j]]
        frame.to_csv(target, sep=self.sep, index=False)

    def emit_fixed(self, table: FixedTable, target: Source, id_column: str = "id") -> None:
        frame = pd.DataFrame({id_column: table.subject_ids})
        numeric_position = {name: j for j, name in enumerate(table.schema.numeric_names)}
        factor_position = {name: j for j, name in enumerate(table.schema.factor_names)}
        for column in table.schema.columns:
            if column.kind == ColumnKind.NUMERIC:
                frame[column.name] = [format_real(v) for v in table.numeric[:, numeric_position[column.name]]]
            else:
                codes = table.factor[:, factor_position[column.name]]
                frame[column.name] = [column.levels[c] if c >= 0 else "NA" for c in codes]
        frame.to_csv(target, sep=self.sep, index=False)

    def emit_outcome(self, outcome: Outcome, target: Source, spec: OutcomeSpec, id_column: str = "id") -> None:
        frame = pd.DataFrame({id_column: outcome.subject_ids})
        if outcome.type == OutcomeType.SURVIVAL:
            frame[spec.time_column] = [format_real(t) for t in outcome.time]
            frame[spec.event_column] = outcome.event.astype(int)
        elif outcome.type == OutcomeType.NUMERIC:
            frame[spec.column] = [format_real(v) for v in outcome.y]
        else:
            frame[spec.column] = [outcome.levels[int(c)] for c in outcome.y]
        frame.to_csv(target, sep=self.sep, index=False)
