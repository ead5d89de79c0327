"""
Delimited-text report writers.

Every report is a plain table; missing cells are written as NA. Tables that
derive from a model archive carry its hash in an archive_hash column.
"""

from pathlib import Path
from typing import Iterable, List, Optional, Union

import pandas as pd

from ..models.data import OutcomeType
from ..models.results import (
    DepthResult,
    ImportanceTable,
    OobResult,
    PredictionResult,
    TuningResult,
)

PathLike = Union[str, Path]


def write_table(frame: pd.DataFrame, path: PathLike, sep: str = ",") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep=sep, index=False, na_rep="NA")
    return path


def _with_hash(frame: pd.DataFrame, archive_hash: Optional[str]) -> pd.DataFrame:
    return frame.assign(archive_hash=archive_hash) if archive_hash else frame


def oob_frames(result: OobResult):
    """Per-subject errors and a one-row summary"""
    per_subject = pd.DataFrame({"id": result.subject_ids, "error": result.errors})
    summary = pd.DataFrame([{
        "outcome_type": result.outcome_type.value,
        "oob_error": result.oob_error,
        "n_subjects": len(result.subject_ids),
        "n_never_oob": len(result.never_oob),
        "n_degenerate_weights": result.n_degenerate_weights,
        "averaging": result.averaging,
        "landmark": result.landmark,
    }])
    return per_subject, _with_hash(summary, result.archive_hash)


def prediction_frame(result: PredictionResult) -> pd.DataFrame:
    """pred_indiv as (id, pred[, proba]) or, for survival, (id, time, cif)"""
    if result.outcome_type == OutcomeType.SURVIVAL:
        rows = [{"id": sid, "time": t, "cif": value}
                for sid, curve in zip(result.subject_ids, result.pred_indiv)
                for t, value in zip(result.times, curve)]
        return pd.DataFrame(rows, columns=["id", "time", "cif"])
    frame = pd.DataFrame({"id": result.subject_ids, "pred": result.pred_indiv})
    if result.outcome_type == OutcomeType.FACTOR:
        frame["proba"] = result.pred_indiv_proba
    return frame


def leaf_frame(result: PredictionResult) -> pd.DataFrame:
    """Leaf reached in every tree, one column per tree"""
    n_trees = len(result.pred_leaf[0]) if result.pred_leaf else 0
    columns = [f"tree{b + 1}" for b in range(n_trees)]
    frame = pd.DataFrame(result.pred_leaf, columns=columns)
    frame.insert(0, "id", result.subject_ids)
    return frame


def subject_curve(result: PredictionResult, subject_id: str) -> pd.DataFrame:
    """Two-column (time, value) incidence curve of one subject"""
    position = result.subject_ids.index(subject_id)
    return pd.DataFrame({"time": result.times, "value": result.pred_indiv[position]})


def importance_frame(table: ImportanceTable) -> pd.DataFrame:
    frame = pd.DataFrame([row.model_dump() for row in table.rows],
                         columns=["name", "value", "percentage", "count"])
    return _with_hash(frame, table.archive_hash)


def depth_tree_frame(result: DepthResult, by_feature: bool = False) -> pd.DataFrame:
    """Per-tree first-use depth, one row per (tree, item)"""
    per_tree = result.tree_feature_depth if by_feature else result.tree_predictor_depth
    rows = [{"tree": b + 1, "name": name, "depth": depth,
             "count": None if by_feature else result.tree_usage[b].get(name, 0)}
            for b, depths in enumerate(per_tree) for name, depth in sorted(depths.items())]
    frame = pd.DataFrame(rows, columns=["tree", "name", "depth", "count"])
    frame["count"] = frame["count"].astype("Int64")
    return frame


def depth_report(result: DepthResult, predictors: ImportanceTable, features: ImportanceTable) -> str:
    """Text report of mean minimal depths with any advice lines"""
    lines = [f"Minimal depth over {result.ntree} trees (mtry={result.mtry}, "
             f"{result.n_predictors} predictors)"]
    lines += [f"Warning: {warning}" for warning in result.warnings]
    for title, table in (("Predictors", predictors), ("Features", features)):
        lines.append(title)
        if not table.rows:
            lines.append("\t(none used)")
        for row in table.rows:
            lines.append(f"\t{row.name}\t{row.value:.3f}\t{row.count}")
    if result.archive_hash:
        lines.append(f"Archive: {result.archive_hash}")
    return "\n".join(lines) + "\n"


def tuning_frame(result: TuningResult, archive_hash: Optional[str] = None) -> pd.DataFrame:
    frame = pd.DataFrame([row.model_dump() for row in result.rows], columns=["mtry", "oob_error"])
    frame["best"] = frame["mtry"] == result.best_mtry
    return _with_hash(frame, archive_hash)


def parse_id_list(value: Optional[str]) -> List[str]:
    return [item.strip() for item in (value or "").split(",") if item.strip()]


def parse_groups(values: Iterable[str]) -> dict:
    """Parse NAME=a,b,c group definitions"""
    groups = {}
    for value in values:
        name, _, members = value.partition("=")
        groups[name.strip()] = parse_id_list(members)
    return groups
