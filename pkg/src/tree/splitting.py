"""
Split candidates, cutpoints and split scores.

Numeric and factor outcomes minimise a weighted within-group impurity;
survival outcomes maximise a two-sample test statistic.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import entr

from ..models.data import NsplitOption, OutcomeType
from ..models.tables import Outcome
from ..survival.estimators import SurvSample
from ..survival.two_sample import gray_stat, logrank_stat
from ..utils.errors import InvalidPartition, NoValidCut, TooManyLevels

DECILES = np.arange(1, 10) / 10.0
MAX_FACTOR_LEVELS = 10
N_SAMPLED_CUTS = 9


@dataclass(frozen=True)
class NodeOutcome:
    """Outcome values of the subjects at a node"""
    type: OutcomeType
    y: Optional[np.ndarray] = None
    n_levels: int = 0
    time: Optional[np.ndarray] = None
    event: Optional[np.ndarray] = None
    cause: Optional[int] = None
    single_cause: bool = True

    @classmethod
    def from_outcome(cls, outcome: Outcome, rows: np.ndarray) -> "NodeOutcome":
        if outcome.type == OutcomeType.SURVIVAL:
            return cls(outcome.type, time=outcome.time[rows], event=outcome.event[rows],
                       cause=outcome.cause, single_cause=len(outcome.causes) == 1)
        return cls(outcome.type, y=outcome.y[rows], n_levels=len(outcome.levels or []))

    def __len__(self) -> int:
        return len(self.time) if self.type == OutcomeType.SURVIVAL else len(self.y)

    def take(self, index: np.ndarray) -> "NodeOutcome":
        if self.type == OutcomeType.SURVIVAL:
            return NodeOutcome(self.type, time=self.time[index], event=self.event[index],
                               cause=self.cause, single_cause=self.single_cause)
        return NodeOutcome(self.type, y=self.y[index], n_levels=self.n_levels)

    @property
    def n_any_events(self) -> int:
        return int(np.sum(self.event > 0)) if self.type == OutcomeType.SURVIVAL else 0

    @property
    def n_cause_events(self) -> int:
        return int(np.sum(self.event == self.cause)) if self.type == OutcomeType.SURVIVAL else 0

    def is_pure(self) -> bool:
        """True when no split can lower the impurity of a numeric or factor node"""
        if self.type == OutcomeType.NUMERIC:
            return bool(np.all(self.y == self.y[0]))
        if self.type == OutcomeType.FACTOR:
            return len(np.unique(self.y)) == 1
        return False


@dataclass(frozen=True)
class SplitScore:
    """Score of a partition and its orientation"""
    value: float
    higher_is_better: bool

    def better_than(self, other: Optional["SplitScore"]) -> bool:
        """Strict improvement, so the first of tied splits is kept"""
        if other is None:
            return True
        if self.higher_is_better:
            return self.value > other.value
        return self.value < other.value


def draw_candidates(rng: np.random.Generator, P: int, Q: int, mtry: int) -> List[int]:
    """Draw mtry predictor indices without replacement (markers are 0..Q-1)"""
    return [int(i) for i in rng.choice(P + Q, size=mtry, replace=False)]


def enumerate_cutpoints(values: np.ndarray, option: NsplitOption = NsplitOption.QUANTILE,
                        rng: Optional[np.random.Generator] = None) -> List[float]:
    """Cutpoints c (value <= c goes left) that leave both sides nonempty.

    Quantile cuts are the linearly interpolated interior deciles; cuts
    inducing the same partition are kept once. Sampled cuts are drawn among
    the distinct values below the maximum.
    """
    values = np.asarray(values, dtype=float)
    distinct = np.unique(values)
    if len(distinct) < 2:
        raise NoValidCut("all values are identical")

    if option == NsplitOption.SAMPLE:
        rng = rng if rng is not None else np.random.default_rng()
        pool = distinct[:-1]
        size = min(N_SAMPLED_CUTS, len(pool))
        return sorted(float(c) for c in rng.choice(pool, size=size, replace=False))

    sorted_values = np.sort(values)
    cuts, seen = [], set()
    for cut in np.quantile(values, DECILES):
        n_left = int(np.searchsorted(sorted_values, cut, side="right"))
        if 0 < n_left < len(values) and n_left not in seen:
            seen.add(n_left)
            cuts.append(float(cut))
    if not cuts:
        raise NoValidCut("no decile separates the values")
    return cuts


def enumerate_factor_splits(levels: Sequence[int]) -> List[frozenset]:
    """All binary partitions of the present levels, as the set routed left.

    The first level always goes left, which removes complement duplicates.
    """
    levels = sorted(set(int(v) for v in levels))
    if len(levels) > MAX_FACTOR_LEVELS:
        raise TooManyLevels(f"{len(levels)} levels present, at most {MAX_FACTOR_LEVELS} supported")
    if len(levels) < 2:
        raise NoValidCut("fewer than two levels present")
    first, rest = levels[0], levels[1:]
    splits = []
    for size in range(0, len(rest)):
        for combo in combinations(rest, size):
            splits.append(frozenset((first,) + combo))
    return splits


def _entropy(codes: np.ndarray, n_levels: int) -> float:
    proportions = np.bincount(codes.astype(int), minlength=n_levels) / len(codes)
    return float(np.sum(entr(proportions)))


def score_split(outcome: NodeOutcome, left: np.ndarray, right: np.ndarray) -> SplitScore:
    """Score the partition of a node into left and right index sets"""
    n_left, n_right = len(left), len(right)
    if n_left == 0 or n_right == 0:
        raise InvalidPartition("both sides must be nonempty")
    n = n_left + n_right

    if outcome.type == OutcomeType.NUMERIC:
        value = (n_left / n) * float(np.var(outcome.y[left])) + (n_right / n) * float(np.var(outcome.y[right]))
        return SplitScore(value, higher_is_better=False)

    if outcome.type == OutcomeType.FACTOR:
        value = ((n_left / n) * _entropy(outcome.y[left], outcome.n_levels)
                 + (n_right / n) * _entropy(outcome.y[right], outcome.n_levels))
        return SplitScore(value, higher_is_better=False)

    if not (np.any(outcome.event[left] > 0) and np.any(outcome.event[right] > 0)):
        raise InvalidPartition("each side needs at least one event")
    left_sample = SurvSample(outcome.time[left], outcome.event[left])
    right_sample = SurvSample(outcome.time[right], outcome.event[right])
    if outcome.single_cause:
        return SplitScore(logrank_stat(left_sample, right_sample), higher_is_better=True)
    return SplitScore(gray_stat(left_sample, right_sample, outcome.cause), higher_is_better=True)
