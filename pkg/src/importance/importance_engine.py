"""
Importance Engine for LongiForest

Permutation importance of predictors and predictor groups, and minimal
depth of predictors and random-effect features.

Permutation happens inside each tree's out-of-bag set: time-fixed
predictors are shuffled at the subject level, longitudinal markers at the
observation level (or as whole trajectories on request). Trees are never
regrown; only their OOB predictions are recomputed and pooled.

The engine is designed to be:
- Deterministic: every (predictor, tree) shuffle has its own seeded stream
- Parallel: (predictor, tree) pairs are evaluated through joblib
- Comparable: errors are pooled exactly as the baseline OOB error
"""

import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from ..forest.forest_engine import ForestEngine
from ..lmm.lmm_engine import feature_name
from ..models.data import PredictorKind
from ..models.forest import ForestArchive, NodeKind, TreeRecord
from ..models.results import (
    DepthResult,
    GroupVimpResult,
    ImportanceRow,
    ImportanceTable,
    VimpResult,
)
from ..models.tables import MarkerObservations, Predictor, PredictorData, ValidatedDataset
from ..utils.audit import AuditLogger
from ..utils.errors import EmptyGroup, OverlappingGroups, UnknownPredictor


def permutation_rng(seed: int, predictor_index: int, tree_index: int, repeat: int = 0) -> np.random.Generator:
    """Generator of one (predictor, tree, repeat) shuffle"""
    return np.random.default_rng([int(seed), int(predictor_index), int(tree_index), int(repeat)])


def permute_predictor(data: PredictorData, predictor: Predictor, oob_rows: np.ndarray,
                      rng: np.random.Generator, trajectory_permutation: bool = False) -> PredictorData:
    """Shuffle one predictor among the out-of-bag subjects of a tree"""
    oob_rows = np.asarray(oob_rows, dtype=int)
    if len(oob_rows) < 2:
        return data

    if predictor.kind == PredictorKind.NUMERIC:
        values = data.numeric[:, predictor.index].copy()
        values[oob_rows] = values[rng.permutation(oob_rows)]
        return data.with_numeric(predictor.index, values)

    if predictor.kind == PredictorKind.FACTOR:
        codes = data.factor[:, predictor.index].copy()
        codes[oob_rows] = codes[rng.permutation(oob_rows)]
        return data.with_factor(predictor.index, codes)

    obs = data.observations[predictor.name]
    in_oob = np.isin(obs.subject_index, oob_rows)
    if trajectory_permutation:
        recipient = np.arange(data.n_subjects)
        recipient[oob_rows] = rng.permutation(oob_rows)
        subject_index = np.where(in_oob, recipient[obs.subject_index], obs.subject_index)
        order = np.lexsort((obs.time, subject_index))
        permuted = MarkerObservations(subject_index[order], obs.time[order], obs.value[order])
    else:
        positions = np.flatnonzero(in_oob)
        value = obs.value.copy()
        value[positions] = obs.value[rng.permutation(positions)]
        permuted = MarkerObservations(obs.subject_index, obs.time, value)
    return data.with_observations(predictor.name, permuted)


class ImportanceEngine:
    """Engine for permutation importance and minimal depth"""

    def __init__(self, audit_logger: Optional[AuditLogger] = None, n_jobs: int = 1):
        """Initialize importance engine"""
        self.audit_logger = audit_logger or AuditLogger()
        self.n_jobs = n_jobs
        self.forest_engine = ForestEngine(self.audit_logger, n_jobs)

    def _baseline(self, forest: ForestArchive, dataset: ValidatedDataset) -> float:
        prediction = self.forest_engine.oob_predict(forest, dataset)
        errors = self.forest_engine.prediction_error(forest, dataset, prediction)["errors"]
        return float(np.mean(errors))

    def _permuted_tree(self, forest: ForestArchive, tree: TreeRecord, data: PredictorData,
                       members: Sequence[Tuple[int, Predictor]], seed: int, repeat: int,
                       trajectory_permutation: bool) -> Tuple[np.ndarray, np.ndarray]:
        oob_rows = np.asarray(tree.oob_rows, dtype=int)
        for position, predictor in members:
            rng = permutation_rng(seed, position, tree.index, repeat)
            data = permute_predictor(data, predictor, oob_rows, rng, trajectory_permutation)
        return oob_rows, self.forest_engine.tree_predictions(forest, tree, data, oob_rows)

    def _permuted_error(self, forest: ForestArchive, dataset: ValidatedDataset,
                        members: Sequence[Tuple[int, Predictor]], seed: int, repeat: int,
                        trajectory_permutation: bool) -> float:
        """Pooled OOB error with the members permuted in every tree"""
        data = dataset.predictors
        if self.n_jobs == 1:
            parts = [self._permuted_tree(forest, tree, data, members, seed, repeat, trajectory_permutation)
                     for tree in forest.trees]
        else:
            parts = Parallel(n_jobs=self.n_jobs)(
                delayed(self._permuted_tree)(forest, tree, data, members, seed, repeat, trajectory_permutation)
                for tree in forest.trees
            )
        prediction = self.forest_engine.combine(forest, parts, dataset.n_subjects)
        errors = self.forest_engine.prediction_error(forest, dataset, prediction)["errors"]
        return float(np.mean(errors))

    def compute_vimp(self, forest: ForestArchive, dataset: ValidatedDataset, seed: int = 1234,
                     repeats: int = 1, trajectory_permutation: bool = False,
                     archive_hash: Optional[str] = None) -> VimpResult:
        """Increase of the OOB error after permuting each predictor"""
        start_time = time.time()
        base_error = self._baseline(forest, dataset)
        predictors = dataset.predictors.predictors

        importance = []
        for position, predictor in enumerate(predictors):
            permuted = [self._permuted_error(forest, dataset, [(position, predictor)], seed, r,
                                             trajectory_permutation) for r in range(repeats)]
            importance.append(float(np.mean(permuted)) - base_error)

        self.audit_logger.log_importance("VIMP", len(predictors), seed, int((time.time() - start_time) * 1000))
        return VimpResult(
            predictors=[p.name for p in predictors],
            kinds=[p.kind.value for p in predictors],
            importance=importance,
            base_error=base_error,
            seed=seed,
            repeats=repeats,
            trajectory_permutation=trajectory_permutation,
            archive_hash=archive_hash,
        )

    def compute_gvimp(self, forest: ForestArchive, dataset: ValidatedDataset, groups: Dict[str, List[str]],
                      seed: int = 1234, repeats: int = 1, trajectory_permutation: bool = False,
                      archive_hash: Optional[str] = None) -> GroupVimpResult:
        """Increase of the OOB error after permuting all members of each group together"""
        start_time = time.time()
        predictors = dataset.predictors.predictors
        position_of = {p.name: i for i, p in enumerate(predictors)}

        seen: Dict[str, str] = {}
        for group, names in groups.items():
            if not names:
                raise EmptyGroup(f"group {group} has no predictors")
            for name in names:
                if name not in position_of:
                    raise UnknownPredictor(f"group {group} names unknown predictor {name}")
                if name in seen:
                    raise OverlappingGroups(f"{name} belongs to groups {seen[name]} and {group}")
                seen[name] = group

        base_error = self._baseline(forest, dataset)
        importance = {}
        for group, names in groups.items():
            members = [(position_of[name], predictors[position_of[name]]) for name in names]
            permuted = [self._permuted_error(forest, dataset, members, seed, r, trajectory_permutation)
                        for r in range(repeats)]
            importance[group] = float(np.mean(permuted)) - base_error

        self.audit_logger.log_importance("gVIMP", len(groups), seed, int((time.time() - start_time) * 1000))
        return GroupVimpResult(groups={g: list(n) for g, n in groups.items()}, importance=importance,
                               base_error=base_error, seed=seed, repeats=repeats, archive_hash=archive_hash)

    def compute_min_depth(self, forest: ForestArchive, archive_hash: Optional[str] = None) -> DepthResult:
        """First-use depth of predictors and features, averaged over trees using them"""
        start_time = time.time()
        n_predictors = (len(forest.marker_specs) + len(forest.fixed_schema.numeric_names)
                        + len(forest.fixed_schema.factor_names))

        tree_predictor_depth, tree_feature_depth, tree_usage = [], [], []
        for tree in forest.trees:
            predictor_depth: Dict[str, int] = {}
            feature_depth: Dict[str, int] = {}
            usage: Dict[str, int] = {}
            for record in tree.splits:
                if record.kind == NodeKind.LEAF:
                    continue
                name = record.var_name
                usage[name] = usage.get(name, 0) + 1
                predictor_depth[name] = min(predictor_depth.get(name, record.depth), record.depth)
                if record.kind == NodeKind.LONGITUDINAL:
                    feature = feature_name(name, record.feature_index)
                    feature_depth[feature] = min(feature_depth.get(feature, record.depth), record.depth)
            tree_predictor_depth.append(predictor_depth)
            tree_feature_depth.append(feature_depth)
            tree_usage.append(usage)

        predictor_mean, predictor_count = _average_depths(tree_predictor_depth)
        feature_mean, feature_count = _average_depths(tree_feature_depth)

        warnings = []
        if forest.mtry < n_predictors:
            warnings.append(
                f"mtry={forest.mtry} is below the number of predictors ({n_predictors}); "
                f"minimal depth is best interpreted with mtry at its maximum"
            )
            self.audit_logger.log_depth_advice(forest.mtry, n_predictors)

        self.audit_logger.log_importance("min_depth", len(predictor_mean), forest.hyperparams.seed,
                                         int((time.time() - start_time) * 1000))
        return DepthResult(
            ntree=forest.ntree,
            mtry=forest.mtry,
            n_predictors=n_predictors,
            predictor_depth=predictor_mean,
            predictor_count=predictor_count,
            feature_depth=feature_mean,
            feature_count=feature_count,
            tree_predictor_depth=tree_predictor_depth,
            tree_feature_depth=tree_feature_depth,
            tree_usage=tree_usage,
            warnings=warnings,
            archive_hash=archive_hash,
        )


def _average_depths(per_tree: List[Dict[str, int]]) -> Tuple[Dict[str, float], Dict[str, int]]:
    totals: Dict[str, int] = {}
    counts: Dict[str, int] = {}
    for depths in per_tree:
        for name, depth in depths.items():
            totals[name] = totals.get(name, 0) + depth
            counts[name] = counts.get(name, 0) + 1
    return {name: totals[name] / counts[name] for name in totals}, counts


def importance_report(result, as_percentage: bool = False, by_feature: bool = False) -> ImportanceTable:
    """Sorted importance table: descending importance, ascending depth.

    Percentages divide importance by the baseline OOB error. For depth
    results `by_feature` switches from predictors to random-effect features.
    """
    if isinstance(result, DepthResult):
        depths = result.feature_depth if by_feature else result.predictor_depth
        counts = result.feature_count if by_feature else result.predictor_count
        rows = [ImportanceRow(name=name, value=value, count=counts[name]) for name, value in depths.items()]
        rows.sort(key=lambda row: (row.value, row.name))
        return ImportanceTable(kind="feature_depth" if by_feature else "min_depth", rows=rows,
                               warnings=result.warnings, archive_hash=result.archive_hash)

    if isinstance(result, VimpResult):
        items, kind = result.as_dict(), "vimp"
    else:
        items, kind = result.importance, "gvimp"

    rows = []
    for name, value in items.items():
        percentage = None
        if as_percentage and result.base_error > 0:
            percentage = 100.0 * value / result.base_error
        rows.append(ImportanceRow(name=name, value=value, percentage=percentage))
    rows.sort(key=lambda row: -row.value)
    return ImportanceTable(kind=kind, rows=rows, base_error=result.base_error, archive_hash=result.archive_hash)
