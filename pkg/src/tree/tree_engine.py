"""
Tree Engine for LongiForest

Grows one tree on a bootstrap sample and routes subjects down grown trees.

At each node a random subset of predictors is drawn. Longitudinal
candidates are summarised by the random effects of a mixed model fitted on
the node's subjects; every random effect is a separate continuous feature.
The best (feature, cut) pair over all candidates splits node d into 2d and
2d+1.

The engine is designed to be:
- Deterministic: all randomness comes from the tree's own generator
- Exhaustive: every cut of every candidate feature is scored
- Traceable: skipped candidates are reported for auditing
"""

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..lmm.lmm_engine import LmmDesign, LmmFit, marker_stats, random_effects_from_stats, try_fit
from ..models.data import NsplitOption, OutcomeType, PredictorKind
from ..models.forest import LeafSummary, NodeKind, SplitRecord, TreeRecord
from ..models.tables import Outcome, Predictor, PredictorData, ValidatedDataset
from ..survival.estimators import SurvSample, leaf_cif
from ..utils.errors import InvalidPartition, NoValidCut, TooManyLevels
from .splitting import (
    NodeOutcome,
    SplitScore,
    draw_candidates,
    enumerate_cutpoints,
    enumerate_factor_splits,
    score_split,
)


@dataclass
class BestSplit:
    """Optimal split of a node"""
    predictor: Predictor
    score: SplitScore
    left: np.ndarray
    right: np.ndarray
    feature_index: Optional[int] = None
    threshold: Optional[float] = None
    left_levels: Optional[frozenset] = None
    missing_left: bool = True
    fit: Optional[LmmFit] = None


@dataclass(frozen=True)
class SkippedCandidate:
    """Candidate that could not be evaluated at a node"""
    node_id: int
    predictor: str
    reason: str


@dataclass
class GrownTree:
    """A grown tree and its growth diagnostics"""
    record: TreeRecord
    skipped: List[SkippedCandidate] = field(default_factory=list)
    growth_time_ms: int = 0


class TreeBuilder:
    """Grows trees for one dataset and hyperparameter setting"""

    def __init__(self, predictors: PredictorData, outcome: Outcome, mtry: int,
                 nodesize: int = 1, minsplit: int = 2,
                 nsplit_option: NsplitOption = NsplitOption.QUANTILE):
        """Initialize tree builder"""
        self.data = predictors
        self.outcome = outcome
        self.mtry = mtry
        self.nodesize = nodesize
        self.minsplit = minsplit
        self.nsplit_option = nsplit_option
        self.predictor_list = predictors.predictors
        self.designs = [LmmDesign.from_spec(spec) for spec in predictors.marker_specs]
        self.Q = len(predictors.marker_specs)
        self.P = len(self.predictor_list) - self.Q

    @classmethod
    def for_dataset(cls, dataset: ValidatedDataset) -> "TreeBuilder":
        hp = dataset.hyperparams
        return cls(dataset.predictors, dataset.outcome, dataset.mtry, hp.nodesize,
                   hp.minsplit, hp.nsplit_option)

    def find_best_split(self, rows: np.ndarray, candidates: Sequence[int], node_outcome: NodeOutcome,
                        rng: np.random.Generator, node_id: int = 1,
                        skipped: Optional[List[SkippedCandidate]] = None) -> Optional[BestSplit]:
        """Best split over candidates, first encountered winning ties"""
        skipped = skipped if skipped is not None else []
        best: Optional[BestSplit] = None

        def consider(predictor, left_mask, right_mask, **attrs):
            nonlocal best
            left, right = np.flatnonzero(left_mask), np.flatnonzero(right_mask)
            if len(left) < self.nodesize or len(right) < self.nodesize:
                return
            try:
                score = score_split(node_outcome, left, right)
            except InvalidPartition:
                return
            if score.better_than(best.score if best else None):
                best = BestSplit(predictor=predictor, score=score, left=left, right=right, **attrs)

        for candidate in candidates:
            predictor = self.predictor_list[candidate]

            if predictor.kind == PredictorKind.LONGITUDINAL:
                spec = self.data.marker_specs[predictor.index]
                design = self.designs[predictor.index]
                stats = marker_stats(self.data, spec).take(rows)
                fit, reason = try_fit(design, stats)
                if fit is None:
                    skipped.append(SkippedCandidate(node_id, predictor.name, reason))
                    continue
                features = random_effects_from_stats(fit, stats)
                for j in range(design.q_r):
                    column = features[:, j]
                    try:
                        cuts = enumerate_cutpoints(column, self.nsplit_option, rng)
                    except NoValidCut:
                        continue
                    for cut in cuts:
                        consider(predictor, column <= cut, column > cut,
                                 feature_index=j, threshold=cut, fit=fit)

            elif predictor.kind == PredictorKind.NUMERIC:
                values = self.data.numeric[rows, predictor.index]
                present = ~np.isnan(values)
                try:
                    cuts = enumerate_cutpoints(values[present], self.nsplit_option, rng)
                except NoValidCut:
                    continue
                for cut in cuts:
                    left_mask = present & (values <= cut)
                    right_mask = present & (values > cut)
                    missing_left = bool(left_mask.sum() >= right_mask.sum())
                    consider(predictor, left_mask | (~present & missing_left),
                             right_mask | (~present & (not missing_left)),
                             threshold=cut, missing_left=missing_left)

            else:
                codes = self.data.factor[rows, predictor.index]
                present = codes >= 0
                try:
                    subsets = enumerate_factor_splits(np.unique(codes[present]))
                except TooManyLevels:
                    skipped.append(SkippedCandidate(node_id, predictor.name, "TooManyLevels"))
                    continue
                except NoValidCut:
                    continue
                for subset in subsets:
                    in_left = np.isin(codes, list(subset))
                    left_mask = present & in_left
                    right_mask = present & ~in_left
                    missing_left = bool(left_mask.sum() >= right_mask.sum())
                    consider(predictor, left_mask | (~present & missing_left),
                             right_mask | (~present & (not missing_left)),
                             left_levels=subset, missing_left=missing_left)

        return best

    def _leaf_summary(self, node_outcome: NodeOutcome) -> LeafSummary:
        n = len(node_outcome)
        if node_outcome.type == OutcomeType.NUMERIC:
            return LeafSummary(n_subjects=n, mean=float(np.mean(node_outcome.y)))
        if node_outcome.type == OutcomeType.FACTOR:
            counts = np.bincount(node_outcome.y.astype(int), minlength=node_outcome.n_levels)
            category = int(np.argmax(counts))
            return LeafSummary(n_subjects=n, category=category, vote_share=float(counts[category] / n))
        sample = SurvSample(node_outcome.time, node_outcome.event)
        curves = leaf_cif(sample, self.outcome.causes)
        return LeafSummary(
            n_subjects=n,
            cif={cause: curve.to_record() for cause, curve in curves.items()},
            n_events=node_outcome.n_cause_events,
        )

    def _is_terminal(self, node_outcome: NodeOutcome) -> bool:
        if len(node_outcome) < 2 * self.nodesize:
            return True
        if node_outcome.type == OutcomeType.SURVIVAL:
            return node_outcome.n_any_events < self.minsplit
        return node_outcome.is_pure()

    def grow(self, boot_rows: np.ndarray, rng: np.random.Generator, tree_index: int = 0,
             seed: Sequence[int] = ()) -> GrownTree:
        """Grow a tree from node 1 on the bootstrap rows"""
        start_time = time.time()
        boot_rows = np.asarray(boot_rows, dtype=int)
        n_boot = len(boot_rows)
        survival = self.outcome.type == OutcomeType.SURVIVAL

        splits: Dict[int, SplitRecord] = {}
        leaves: Dict[int, LeafSummary] = {}
        node_lmm = {}
        boot_leaves = np.zeros(n_boot, dtype=int)
        skipped: List[SkippedCandidate] = []

        queue = deque([(1, np.arange(n_boot), 1)])
        while queue:
            node_id, positions, depth = queue.popleft()
            rows = boot_rows[positions]
            node_outcome = NodeOutcome.from_outcome(self.outcome, rows)
            n_events = node_outcome.n_cause_events if survival else None

            best = None
            if not self._is_terminal(node_outcome):
                candidates = draw_candidates(rng, self.P, self.Q, self.mtry)
                best = self.find_best_split(rows, candidates, node_outcome, rng, node_id, skipped)

            if best is None:
                splits[node_id] = SplitRecord(node_id=node_id, kind=NodeKind.LEAF,
                                              n_subjects=len(rows), n_events=n_events, depth=depth)
                leaves[node_id] = self._leaf_summary(node_outcome)
                boot_leaves[positions] = node_id
                continue

            predictor = best.predictor
            splits[node_id] = SplitRecord(
                node_id=node_id,
                kind=NodeKind.from_predictor(predictor.kind),
                var_index=predictor.index,
                var_name=predictor.name,
                feature_index=best.feature_index,
                threshold=best.threshold,
                left_levels=sorted(best.left_levels) if best.left_levels is not None else None,
                missing_left=best.missing_left,
                n_subjects=len(rows),
                n_events=n_events,
                depth=depth,
            )
            if best.fit is not None:
                node_lmm[node_id] = best.fit.to_record(predictor.name)
            queue.append((2 * node_id, positions[best.left], depth + 1))
            queue.append((2 * node_id + 1, positions[best.right], depth + 1))

        oob_rows = np.setdiff1d(np.arange(self.data.n_subjects), boot_rows)
        record = TreeRecord(
            index=tree_index,
            seed=list(seed),
            splits=[splits[k] for k in sorted(splits)],
            node_lmm=node_lmm,
            leaves=leaves,
            boot_rows=boot_rows.tolist(),
            oob_rows=oob_rows.tolist(),
            boot_leaves=boot_leaves.tolist(),
        )
        return GrownTree(record, skipped, int((time.time() - start_time) * 1000))


def grow_tree(dataset: ValidatedDataset, boot_rows: np.ndarray, rng: np.random.Generator,
              tree_index: int = 0, seed: Sequence[int] = ()) -> GrownTree:
    """Grow one tree of a validated dataset"""
    return TreeBuilder.for_dataset(dataset).grow(boot_rows, rng, tree_index, seed)


def _goes_left(record: SplitRecord, data: PredictorData, rows: np.ndarray,
               fits: Dict[int, LmmFit]) -> np.ndarray:
    if record.kind == NodeKind.LONGITUDINAL:
        spec = data.marker_specs[record.var_index]
        stats = marker_stats(data, spec).take(rows)
        features = random_effects_from_stats(fits[record.node_id], stats)
        return features[:, record.feature_index] <= record.threshold
    if record.kind == NodeKind.NUMERIC:
        values = data.numeric[rows, record.var_index]
        missing = np.isnan(values)
        return np.where(missing, record.missing_left, values <= record.threshold)
    codes = data.factor[rows, record.var_index]
    missing = codes < 0
    return np.where(missing, record.missing_left, np.isin(codes, record.left_levels or []))


def route(tree: TreeRecord, data: PredictorData, rows: Optional[np.ndarray] = None,
          landmark: Optional[float] = None) -> np.ndarray:
    """Terminal node of each subject row, using history up to the landmark"""
    data = data.up_to(landmark)
    rows = np.arange(data.n_subjects) if rows is None else np.asarray(rows, dtype=int)
    split_map = tree.split_map()
    fits = {node: LmmFit.from_record(rec) for node, rec in tree.node_lmm.items()}
    leaves = np.zeros(len(rows), dtype=int)

    stack = [(1, np.arange(len(rows)))]
    while stack:
        node_id, index = stack.pop()
        if len(index) == 0:
            continue
        record = split_map[node_id]
        if record.is_leaf:
            leaves[index] = node_id
            continue
        left = _goes_left(record, data, rows[index], fits)
        stack.append((2 * node_id + 1, index[~left]))
        stack.append((2 * node_id, index[left]))
    return leaves


def drop_down(tree: TreeRecord, data: PredictorData, row: int, landmark: Optional[float] = None) -> int:
    """Terminal node reached by one subject"""
    return int(route(tree, data, np.array([row]), landmark)[0])
