"""
Forest Engine for LongiForest

Grows B trees on bootstrap samples, aggregates out-of-bag and new-subject
predictions, computes out-of-bag error and summarises the forest.

Each tree draws its bootstrap sample and all node-level randomness from a
private generator seeded by (seed, tree index), and results are collected
in tree order, so forests do not depend on the number of workers.

The engine is designed to be:
- Deterministic: bit-identical forests for identical inputs and seed
- Parallel: trees grow concurrently through joblib
- Auditable: tree growth, skipped candidates and OOB runs are logged
"""

import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..models.data import OutcomeType, PredictorKind
from ..models.forest import ForestArchive, NodeKind, OutcomeInfo, TreeRecord
from ..models.results import OobResult, PredictionResult, TuningResult, TuningRow
from ..models.tables import PredictorData, ValidatedDataset
from ..survival.brier import integrated_brier_components
from ..survival.estimators import CifCurve, SurvSample, censoring_km
from ..tree.tree_engine import GrownTree, TreeBuilder, route
from ..utils.audit import AuditLogger
from ..utils.errors import InvalidConfig, MtryTooLarge, NeverOob, SchemaMismatch

SPLIT_RULES = {
    OutcomeType.NUMERIC: "Minimize weighted within-group variance",
    OutcomeType.FACTOR: "Minimize weighted within-group Shannon entropy",
}
LEAF_STATISTICS = {
    OutcomeType.NUMERIC: "Mean",
    OutcomeType.FACTOR: "Majority vote",
    OutcomeType.SURVIVAL: "Cumulative incidence function",
}
ERROR_NAMES = {
    OutcomeType.NUMERIC: "Mean square error",
    OutcomeType.FACTOR: "Missclassification",
    OutcomeType.SURVIVAL: "Integrated Brier Score",
}


def tree_seed(seed: int, tree_index: int) -> List[int]:
    """Seed sequence entropy of one tree's stream"""
    return [int(seed), int(tree_index)]


def _grow_one(builder: TreeBuilder, n_subjects: int, seed: int, tree_index: int) -> GrownTree:
    entropy = tree_seed(seed, tree_index)
    rng = np.random.default_rng(entropy)
    boot_rows = rng.integers(0, n_subjects, size=n_subjects)
    return builder.grow(boot_rows, rng, tree_index, entropy)


@dataclass(frozen=True)
class AggregatedPrediction:
    """Aggregated predictions for a set of subject rows"""
    rows: np.ndarray
    values: np.ndarray
    n_trees: np.ndarray
    proba: Optional[np.ndarray] = None


class ForestEngine:
    """Engine for growing forests and computing their predictions"""

    def __init__(self, audit_logger: Optional[AuditLogger] = None, n_jobs: int = 1):
        """Initialize forest engine"""
        self.audit_logger = audit_logger or AuditLogger()
        self.n_jobs = n_jobs

    # Growth

    def grow_forest(self, dataset: ValidatedDataset) -> ForestArchive:
        """Grow ntree trees, each on its own bootstrap sample"""
        start_time = time.time()
        hp = dataset.hyperparams
        builder = TreeBuilder.for_dataset(dataset)
        n = dataset.n_subjects

        if self.n_jobs == 1:
            grown = [_grow_one(builder, n, hp.seed, b) for b in range(hp.ntree)]
        else:
            grown = Parallel(n_jobs=self.n_jobs)(
                delayed(_grow_one)(builder, n, hp.seed, b) for b in range(hp.ntree)
            )

        for tree in grown:
            for skip in tree.skipped:
                self.audit_logger.log_candidate_skipped(tree.record.index, skip.node_id,
                                                        skip.predictor, skip.reason)
            self.audit_logger.log_tree_grown(tree.record.index, tree.record.n_leaves,
                                             tree.record.depth, len(tree.skipped), tree.growth_time_ms)

        outcome = dataset.outcome
        grid = None
        if outcome.type == OutcomeType.SURVIVAL:
            grid = np.unique(outcome.time[outcome.event == outcome.cause]).tolist()

        forest = ForestArchive(
            outcome=OutcomeInfo(type=outcome.type, levels=outcome.levels,
                                causes=outcome.causes, cause=outcome.cause),
            marker_specs=dataset.predictors.marker_specs,
            fixed_schema=dataset.schema,
            hyperparams=hp,
            mtry=dataset.mtry,
            subject_ids=dataset.subject_ids,
            data_hash=dataset.content_hash(),
            grid=grid,
            trees=[tree.record for tree in grown],
        )
        self.audit_logger.log_forest_grown(hp.ntree, dataset.mtry, self.n_jobs,
                                           int((time.time() - start_time) * 1000))
        return forest

    # Tree-level predictions

    def leaf_values(self, forest: ForestArchive, tree: TreeRecord) -> Dict[int, np.ndarray]:
        """Leaf summary of each terminal node as a prediction vector"""
        values = {}
        info = forest.outcome
        for node_id, leaf in tree.leaves.items():
            if info.type == OutcomeType.NUMERIC:
                values[node_id] = np.array([leaf.mean])
            elif info.type == OutcomeType.FACTOR:
                values[node_id] = np.array([leaf.category])
            else:
                curve = CifCurve.from_record(leaf.cif[info.cause])
                values[node_id] = curve(np.asarray(forest.grid, dtype=float))
        return values

    def tree_predictions(self, forest: ForestArchive, tree: TreeRecord, data: PredictorData,
                         rows: np.ndarray) -> np.ndarray:
        """Leaf summaries reached by the given rows, one row per subject"""
        width = len(forest.grid) if forest.outcome.type == OutcomeType.SURVIVAL else 1
        if len(rows) == 0:
            return np.zeros((0, width))
        values = self.leaf_values(forest, tree)
        return np.vstack([values[leaf] for leaf in route(tree, data, rows)])

    def combine(self, forest: ForestArchive, parts: Sequence[Tuple[np.ndarray, np.ndarray]],
                n_rows: int) -> AggregatedPrediction:
        """Average (or vote) per-tree predictions, reducing in tree order"""
        info = forest.outcome
        width = len(forest.grid) if info.type == OutcomeType.SURVIVAL else 1
        n_levels = len(info.levels or [])
        sums = np.zeros((n_rows, width))
        votes = np.zeros((n_rows, max(n_levels, 1)))
        counts = np.zeros(n_rows, dtype=int)

        for rows, predicted in parts:
            if len(rows) == 0:
                continue
            if info.type == OutcomeType.FACTOR:
                np.add.at(votes, (rows, predicted[:, 0].astype(int)), 1.0)
            else:
                np.add.at(sums, rows, predicted)
            np.add.at(counts, rows, 1)

        covered = np.flatnonzero(counts > 0)
        if info.type == OutcomeType.FACTOR:
            # argmax keeps the lowest level index on ties
            winners = np.argmax(votes[covered], axis=1)
            shares = votes[covered, winners] / counts[covered]
            return AggregatedPrediction(covered, winners.astype(float), counts[covered], shares)
        means = sums[covered] / counts[covered][:, None]
        if info.type == OutcomeType.NUMERIC:
            means = means[:, 0]
        return AggregatedPrediction(covered, means, counts[covered])

    def _aggregate(self, forest: ForestArchive, data: PredictorData,
                   rows_per_tree: Sequence[np.ndarray], n_rows: int) -> AggregatedPrediction:
        parts = [(np.asarray(rows, dtype=int), self.tree_predictions(forest, tree, data, rows))
                 for tree, rows in zip(forest.trees, rows_per_tree)]
        return self.combine(forest, parts, n_rows)

    # Out-of-bag

    def oob_predict(self, forest: ForestArchive, dataset: ValidatedDataset,
                    landmark: Optional[float] = None, averaging: str = "oob") -> AggregatedPrediction:
        """OOB predictions of every subject that is out-of-bag at least once"""
        if averaging not in ("oob", "all"):
            raise InvalidConfig(f"unknown averaging set {averaging}")
        data = dataset.predictors.up_to(landmark)
        n = dataset.n_subjects
        if averaging == "all":
            rows_per_tree = [np.arange(n)] * forest.ntree
        else:
            rows_per_tree = [np.asarray(tree.oob_rows, dtype=int) for tree in forest.trees]
        return self._aggregate(forest, data, rows_per_tree, n)

    def oob_predict_subject(self, forest: ForestArchive, dataset: ValidatedDataset, row: int,
                            landmark: Optional[float] = None):
        """OOB prediction of one subject row"""
        oob_trees = [tree for tree in forest.trees if row in set(tree.oob_rows)]
        if not oob_trees:
            raise NeverOob(f"subject {dataset.subject_ids[row]} is in every bootstrap sample")
        prediction = self.oob_predict(forest, dataset, landmark)
        position = int(np.flatnonzero(prediction.rows == row)[0])
        if forest.outcome.type == OutcomeType.FACTOR:
            return int(prediction.values[position]), float(prediction.proba[position])
        return prediction.values[position]

    def compute_oob_error(self, forest: ForestArchive, dataset: ValidatedDataset,
                          landmark: Optional[float] = None, averaging: str = "oob",
                          archive_hash: Optional[str] = None) -> OobResult:
        """Per-subject OOB errors and their mean"""
        start_time = time.time()
        prediction = self.oob_predict(forest, dataset, landmark, averaging)
        error = self.prediction_error(forest, dataset, prediction)
        never = sorted(set(range(dataset.n_subjects)) - set(prediction.rows.tolist()))
        if never:
            self.audit_logger.log_never_oob(len(never))
        result = OobResult(
            outcome_type=forest.outcome.type,
            subject_ids=[dataset.subject_ids[i] for i in prediction.rows],
            errors=error["errors"].tolist(),
            oob_error=float(error["errors"].mean()) if len(prediction.rows) else float("nan"),
            never_oob=[dataset.subject_ids[i] for i in never],
            n_degenerate_weights=error["n_degenerate"],
            averaging=averaging,
            landmark=landmark,
            archive_hash=archive_hash,
        )
        self.audit_logger.log_oob_error(forest.outcome.type.value, result.oob_error, len(prediction.rows),
                                        int((time.time() - start_time) * 1000), archive_hash)
        return result

    def prediction_error(self, forest: ForestArchive, dataset: ValidatedDataset,
                         prediction: AggregatedPrediction) -> Dict:
        """Per-subject errors of aggregated predictions against the observed outcome"""
        outcome = dataset.outcome
        rows = prediction.rows
        if len(rows) == 0:
            return {"errors": np.zeros(0), "n_degenerate": 0}
        if outcome.type == OutcomeType.NUMERIC:
            return {"errors": (prediction.values - outcome.y[rows]) ** 2, "n_degenerate": 0}
        if outcome.type == OutcomeType.FACTOR:
            return {"errors": (prediction.values != outcome.y[rows]).astype(float), "n_degenerate": 0}

        hp = forest.hyperparams
        full = SurvSample(outcome.time, outcome.event)
        ibs = integrated_brier_components(
            np.asarray(forest.grid), prediction.values, full.take(rows), outcome.cause,
            hp.ibs_min, hp.ibs_max, G=censoring_km(full), event_times=np.asarray(forest.grid),
        )
        if ibs.n_degenerate:
            self.audit_logger.log_degenerate_weights(ibs.n_degenerate, "OOB integrated Brier score")
        return {"errors": ibs.contributions, "n_degenerate": ibs.n_degenerate}

    # New subjects

    def check_schema(self, forest: ForestArchive, data: PredictorData) -> None:
        """Raise SchemaMismatch unless new data carries the training predictors"""
        expected_markers = [spec.name for spec in forest.marker_specs]
        if data.marker_names != expected_markers:
            raise SchemaMismatch(f"markers {data.marker_names} differ from {expected_markers}")
        if data.numeric_names != forest.fixed_schema.numeric_names:
            raise SchemaMismatch("numeric predictors differ from the training schema")
        if data.factor_names != forest.fixed_schema.factor_names:
            raise SchemaMismatch("factor predictors differ from the training schema")
        if data.factor_levels != forest.fixed_schema.factor_levels:
            raise SchemaMismatch("factor levels differ from the training schema")

    def predict_new(self, forest: ForestArchive, data: PredictorData,
                    landmark: Optional[float] = None) -> PredictionResult:
        """Aggregate all trees for new subjects, using history up to the landmark"""
        start_time = time.time()
        self.check_schema(forest, data)
        data = data.up_to(landmark)
        n = data.n_subjects
        all_rows = np.arange(n)
        pred_leaf = np.column_stack([route(tree, data, all_rows) for tree in forest.trees]) \
            if n else np.zeros((0, forest.ntree), dtype=int)
        aggregated = self._aggregate(forest, data, [all_rows] * forest.ntree, n)

        info = forest.outcome
        times = None
        proba = None
        if info.type == OutcomeType.NUMERIC:
            pred_indiv = [float(v) for v in aggregated.values]
        elif info.type == OutcomeType.FACTOR:
            pred_indiv = [info.levels[int(v)] for v in aggregated.values]
            proba = [float(p) for p in aggregated.proba]
        else:
            grid = np.asarray(forest.grid, dtype=float)
            keep = grid > landmark if landmark is not None else np.ones(len(grid), dtype=bool)
            times = grid[keep].tolist()
            pred_indiv = [[float(v) for v in row[keep]] for row in aggregated.values]

        self.audit_logger.log_prediction(n, landmark, int((time.time() - start_time) * 1000))
        return PredictionResult(
            outcome_type=info.type,
            t0=landmark,
            times=times,
            subject_ids=list(data.subject_ids),
            pred_indiv=pred_indiv,
            pred_leaf=pred_leaf.tolist(),
            pred_indiv_proba=proba,
        )

    # Tuning

    def tune_mtry(self, dataset: ValidatedDataset, grid: Optional[Sequence[int]] = None) -> TuningResult:
        """OOB error of forests grown with each mtry value, other settings fixed"""
        start_time = time.time()
        n_predictors = dataset.P + dataset.Q
        grid = list(grid) if grid is not None else list(range(1, n_predictors + 1))
        if not grid:
            raise InvalidConfig("empty mtry grid")
        for value in grid:
            if value < 1 or value > n_predictors:
                raise MtryTooLarge(f"mtry={value} outside 1..{n_predictors}")

        rows = []
        for value in grid:
            candidate = replace(dataset, mtry=value,
                                hyperparams=dataset.hyperparams.model_copy(update={"mtry": value}))
            forest = self.grow_forest(candidate)
            rows.append(TuningRow(mtry=value, oob_error=self.compute_oob_error(forest, candidate).oob_error))
        best = min(rows, key=lambda row: (row.oob_error, row.mtry))
        self.audit_logger.log_mtry_tuned(grid, best.mtry, int((time.time() - start_time) * 1000))
        return TuningResult(rows=rows, best_mtry=best.mtry)

    # Reports

    def summarize(self, forest: ForestArchive, oob: Optional[OobResult] = None,
                  elapsed_seconds: Optional[float] = None, n_jobs: Optional[int] = None) -> str:
        """Text summary of inputs, tuning parameters, tree statistics and OOB error"""
        info = forest.outcome
        survival = info.type == OutcomeType.SURVIVAL
        if survival:
            rule = "Log-rank statistic test" if len(info.causes or []) == 1 else "Fine & Gray statistic test"
        else:
            rule = SPLIT_RULES[info.type]

        depths = [tree.depth for tree in forest.trees]
        leaves = [tree.n_leaves for tree in forest.trees]
        leaf_sizes = [leaf.n_subjects for tree in forest.trees for leaf in tree.leaves.values()]
        hp = forest.hyperparams

        lines = [
            f"{info.type.value.capitalize()} outcome forest",
            f"Splitting rule: {rule}",
            f"Out-of-bag error type: {ERROR_NAMES[info.type]}",
            f"Leaf statistic: {LEAF_STATISTICS[info.type]}",
            "----------------",
            "Input",
            f"\tNumber of subjects: {len(forest.subject_ids)}",
            f"\tLongitudinal: {len(forest.marker_specs)} predictor(s)",
            f"\tNumeric: {len(forest.fixed_schema.numeric_names)} predictor(s)",
            f"\tFactor: {len(forest.fixed_schema.factor_names)} predictor(s)",
            "----------------",
            "Tuning parameters",
            f"\tmtry: {forest.mtry}",
            f"\tnodesize: {hp.nodesize}",
        ]
        if survival:
            lines.append(f"\tminsplit: {hp.minsplit}")
        lines += [
            f"\tntree: {forest.ntree}",
            "----------------",
            "----------------",
            "Forest summary",
            f"\tAverage depth per tree: {np.mean(depths):.2f}",
            f"\tAverage number of leaves per tree: {np.mean(leaves):.2f}",
            f"\tAverage number of subjects per leaf: {np.mean(leaf_sizes):.2f}",
        ]
        if survival:
            events = [leaf.n_events or 0 for tree in forest.trees for leaf in tree.leaves.values()]
            lines.append(f"\tAverage number of events of interest per leaf: {np.mean(events):.2f}")
        lines += ["----------------", "Out-of-bag error"]
        lines.append(f"\t{oob.oob_error:.4f}" if oob is not None else "\tNot computed!")
        lines += ["----------------", "Computation time"]
        lines.append(f"\tNumber of cores used: {n_jobs if n_jobs is not None else self.n_jobs}")
        if elapsed_seconds is not None:
            lines.append(f"\tTime difference of {elapsed_seconds / 60.0:.2f} mins")
        lines.append("----------------")
        return "\n".join(lines) + "\n"


def tree_table(forest: ForestArchive, tree_index: int) -> pd.DataFrame:
    """Split summary of one tree with 1-based var_split and feature indices"""
    rows = []
    for record in forest.trees[tree_index].splits:
        is_leaf = record.kind == NodeKind.LEAF
        longitudinal = record.kind == NodeKind.LONGITUDINAL
        rows.append({
            "type": record.kind.value,
            "id_node": record.node_id,
            "var_split": None if is_leaf else record.var_index + 1,
            "feature": record.feature_index + 1 if longitudinal else None,
            "threshold": record.threshold if record.kind in (NodeKind.LONGITUDINAL, NodeKind.NUMERIC) else None,
            "N": record.n_subjects,
            "Nevent": record.n_events,
            "depth": record.depth,
        })
    columns = ["type", "id_node", "var_split", "feature", "threshold", "N", "Nevent", "depth"]
    table = pd.DataFrame(rows, columns=columns)
    for column in ("var_split", "feature", "Nevent"):
        table[column] = table[column].astype("Int64")
    return table.sort_values("id_node").reset_index(drop=True)


def leaf_curves(forest: ForestArchive, tree_index: int) -> pd.DataFrame:
    """Per-leaf incidence curves of one survival tree in long format"""
    rows = []
    tree = forest.trees[tree_index]
    for node_id in sorted(tree.leaves):
        for cause, curve in sorted((tree.leaves[node_id].cif or {}).items()):
            for t, v in zip(curve.times, curve.values):
                rows.append({"tree": tree_index + 1, "leaf": node_id, "cause": cause, "time": t, "value": v})
    return pd.DataFrame(rows, columns=["tree", "leaf", "cause", "time", "value"])


def predictor_kinds(forest: ForestArchive) -> Dict[str, PredictorKind]:
    """Predictor name to kind in declared order"""
    kinds = {spec.name: PredictorKind.LONGITUDINAL for spec in forest.marker_specs}
    kinds.update({name: PredictorKind.NUMERIC for name in forest.fixed_schema.numeric_names})
    kinds.update({name: PredictorKind.FACTOR for name in forest.fixed_schema.factor_names})
    return kinds
