"""
Tests for permutation importance and minimal depth.
"""

from dataclasses import replace
from io import StringIO

import numpy as np
import pytest

from src.app.cli import simulation_run_config
from src.forest.forest_engine import ForestEngine
from src.importance.importance_engine import (
    ImportanceEngine,
    importance_report,
    permutation_rng,
    permute_predictor,
)
from src.ingestion.processors import TableProcessor
from src.models.data import Hyperparams, OutcomeType, PredictorKind
from src.models.forest import NodeKind
from src.models.simulation import SimConfig
from src.simulation.generator import generate
from src.utils.audit import AuditAction
from src.utils.errors import EmptyGroup, OverlappingGroups, UnknownPredictor
from src.utils.validation import validate_inputs
from tests.conftest import build_dataset


@pytest.fixture(scope="module")
def grown():
    dataset = build_dataset(OutcomeType.NUMERIC, ntree=4)
    return dataset, ForestEngine().grow_forest(dataset)


def used_predictors(forest):
    return {record.var_name for tree in forest.trees for record in tree.splits if record.kind != NodeKind.LEAF}


class TestPermutePredictor:
    """Test out-of-bag shuffles"""

    def test_numeric_shuffle_stays_inside_oob(self, numeric_dataset):
        data = numeric_dataset.predictors
        predictor = data.predictor("x1")
        oob = np.array([1, 4, 9, 12, 20])
        permuted = permute_predictor(data, predictor, oob, permutation_rng(1, 1, 0))
        outside = np.setdiff1d(np.arange(data.n_subjects), oob)
        assert np.array_equal(permuted.numeric[outside, 0], data.numeric[outside, 0])
        assert sorted(permuted.numeric[oob, 0]) == sorted(data.numeric[oob, 0])
        assert np.array_equal(data.numeric[:, 0], numeric_dataset.predictors.numeric[:, 0])

    def test_factor_shuffle_keeps_codes(self, numeric_dataset):
        data = numeric_dataset.predictors
        oob = np.arange(10)
        permuted = permute_predictor(data, data.predictor("grp"), oob, permutation_rng(1, 2, 0))
        assert sorted(permuted.factor[oob, 0]) == sorted(data.factor[oob, 0])
        assert np.array_equal(permuted.factor[10:, 0], data.factor[10:, 0])

    def test_observation_level_marker_shuffle(self, numeric_dataset):
        data = numeric_dataset.predictors
        oob = np.array([0, 3, 5])
        permuted = permute_predictor(data, data.predictor("m1"), oob, permutation_rng(1, 0, 0))
        before, after = data.observations["m1"], permuted.observations["m1"]
        assert np.array_equal(before.time, after.time)
        assert np.array_equal(before.subject_index, after.subject_index)
        in_oob = np.isin(before.subject_index, oob)
        assert np.array_equal(before.value[~in_oob], after.value[~in_oob])
        assert sorted(before.value[in_oob]) == sorted(after.value[in_oob])

    def test_trajectory_shuffle_moves_whole_series(self, numeric_dataset):
        data = numeric_dataset.predictors
        oob = np.array([0, 3, 5])
        permuted = permute_predictor(data, data.predictor("m1"), oob, permutation_rng(1, 0, 0),
                                     trajectory_permutation=True)
        original = {tuple(data.subject_series(row, "m1")[1]) for row in oob}
        shuffled = {tuple(permuted.subject_series(row, "m1")[1]) for row in oob}
        assert original == shuffled
        for row in (1, 2, 4):
            assert np.array_equal(permuted.subject_series(row, "m1")[1], data.subject_series(row, "m1")[1])

    def test_single_oob_subject_is_untouched(self, numeric_dataset):
        data = numeric_dataset.predictors
        assert permute_predictor(data, data.predictor("x1"), np.array([3]), permutation_rng(1, 1, 0)) is data

    def test_streams_are_reproducible(self):
        first = permutation_rng(5, 2, 3).permutation(20)
        second = permutation_rng(5, 2, 3).permutation(20)
        other = permutation_rng(5, 2, 4).permutation(20)
        assert np.array_equal(first, second)
        assert not np.array_equal(first, other)


class TestVimp:
    """Test predictor permutation importance"""

    def test_unused_predictors_have_zero_importance(self, grown):
        dataset, forest = grown
        result = ImportanceEngine().compute_vimp(forest, dataset, seed=3)
        used = used_predictors(forest)
        for name, value in result.as_dict().items():
            if name not in used:
                assert value == 0.0

    def test_constant_predictor_is_never_used(self):
        dataset = build_dataset(OutcomeType.NUMERIC, n_subjects=20, ntree=2, mtry=3)
        dataset = replace(dataset, predictors=dataset.predictors.with_numeric(0, np.ones(20)))
        forest = ForestEngine().grow_forest(dataset)
        assert "x1" not in used_predictors(forest)
        assert ImportanceEngine().compute_vimp(forest, dataset).as_dict()["x1"] == 0.0

    def test_baseline_is_oob_error(self, grown):
        dataset, forest = grown
        result = ImportanceEngine().compute_vimp(forest, dataset)
        assert result.base_error == pytest.approx(ForestEngine().compute_oob_error(forest, dataset).oob_error)
        assert result.predictors == ["m1", "x1", "grp"]
        assert result.kinds == [PredictorKind.LONGITUDINAL.value, PredictorKind.NUMERIC.value,
                                PredictorKind.FACTOR.value]

    def test_reproducible_and_worker_independent(self, grown):
        dataset, forest = grown
        first = ImportanceEngine().compute_vimp(forest, dataset, seed=11)
        second = ImportanceEngine(n_jobs=2).compute_vimp(forest, dataset, seed=11)
        assert first.importance == second.importance

    def test_repeats_are_recorded(self, grown):
        dataset, forest = grown
        result = ImportanceEngine().compute_vimp(forest, dataset, repeats=2, trajectory_permutation=True)
        assert result.repeats == 2
        assert result.trajectory_permutation is True
        assert all(np.isfinite(result.importance))

    def test_run_is_audited(self, grown, audit_logger):
        dataset, forest = grown
        ImportanceEngine(audit_logger).compute_vimp(forest, dataset)
        assert audit_logger.get_audit_trail(action=AuditAction.IMPORTANCE_COMPUTED)


class TestGroupVimp:
    """Test grouped permutation importance"""

    def test_singleton_group_matches_vimp(self, grown):
        dataset, forest = grown
        engine = ImportanceEngine()
        vimp = engine.compute_vimp(forest, dataset, seed=5).as_dict()
        gvimp = engine.compute_gvimp(forest, dataset, {"only_x1": ["x1"], "only_m1": ["m1"]}, seed=5)
        assert gvimp.importance["only_x1"] == vimp["x1"]
        assert gvimp.importance["only_m1"] == vimp["m1"]

    def test_overlapping_groups(self, grown):
        dataset, forest = grown
        with pytest.raises(OverlappingGroups):
            ImportanceEngine().compute_gvimp(forest, dataset, {"a": ["x1", "m1"], "b": ["x1"]})

    def test_empty_group(self, grown):
        dataset, forest = grown
        with pytest.raises(EmptyGroup):
            ImportanceEngine().compute_gvimp(forest, dataset, {"a": []})

    def test_unknown_predictor(self, grown):
        dataset, forest = grown
        with pytest.raises(UnknownPredictor):
            ImportanceEngine().compute_gvimp(forest, dataset, {"a": ["nope"]})


class TestMinimalDepth:
    """Test minimal depth of predictors and features"""

    def test_root_split_has_depth_one(self, grown):
        _, forest = grown
        result = ImportanceEngine().compute_min_depth(forest)
        for tree, depths in zip(forest.trees, result.tree_predictor_depth):
            root = tree.split_map()[1]
            if root.kind != NodeKind.LEAF:
                assert depths[root.var_name] == 1

    def test_averages_over_trees_using_the_predictor(self, grown):
        _, forest = grown
        result = ImportanceEngine().compute_min_depth(forest)
        for name, mean in result.predictor_depth.items():
            values = [depths[name] for depths in result.tree_predictor_depth if name in depths]
            assert mean == pytest.approx(np.mean(values))
            assert result.predictor_count[name] == len(values)
            assert mean >= 1

    def test_features_are_named_by_marker(self, grown):
        _, forest = grown
        result = ImportanceEngine().compute_min_depth(forest)
        assert all(name.startswith("m1") for name in result.feature_depth)

    def test_warns_when_mtry_is_below_predictor_count(self, grown):
        _, forest = grown
        assert forest.mtry == 2
        result = ImportanceEngine().compute_min_depth(forest)
        assert len(result.warnings) == 1
        assert result.n_predictors == 3

    def test_no_warning_at_full_mtry(self):
        dataset = build_dataset(OutcomeType.NUMERIC, n_subjects=20, ntree=2, mtry=3)
        forest = ForestEngine().grow_forest(dataset)
        assert ImportanceEngine().compute_min_depth(forest).warnings == []


class TestImportanceReport:
    """Test sorted importance tables"""

    def test_vimp_sorted_descending_with_percentages(self, grown):
        dataset, forest = grown
        result = ImportanceEngine().compute_vimp(forest, dataset)
        table = importance_report(result, as_percentage=True)
        values = [row.value for row in table.rows]
        assert values == sorted(values, reverse=True)
        for row in table.rows:
            assert row.percentage == pytest.approx(100.0 * row.value / result.base_error)

    def test_depth_sorted_ascending(self, grown):
        _, forest = grown
        table = importance_report(ImportanceEngine().compute_min_depth(forest))
        values = [row.value for row in table.rows]
        assert table.kind == "min_depth"
        assert values == sorted(values)
        assert all(row.count >= 1 for row in table.rows)

    def test_feature_depth_table(self, grown):
        _, forest = grown
        table = importance_report(ImportanceEngine().compute_min_depth(forest), by_feature=True)
        assert table.kind == "feature_depth"


class TestNullImportance:
    """Test that a pure-noise predictor carries no importance"""

    def test_noise_predictor_is_centred_on_zero(self):
        base = build_dataset(OutcomeType.NUMERIC, n_subjects=40, ntree=10, mtry=3)
        forest_engine, importance_engine = ForestEngine(), ImportanceEngine()
        values, n_used = [], 0
        for seed in range(20):
            dataset = replace(base, hyperparams=base.hyperparams.model_copy(update={"seed": seed}))
            forest = forest_engine.grow_forest(dataset)
            n_used += "grp" in used_predictors(forest)
            values.append(importance_engine.compute_vimp(forest, dataset, seed=seed).as_dict()["grp"])
        values = np.array(values)
        assert n_used > 0
        standard_error = values.std(ddof=1) / np.sqrt(len(values))
        assert abs(values.mean()) <= 2 * standard_error


def simulated_dataset(sim_config, **hyperparams):
    """Generated tables read back through the ingestion layer"""
    data = generate(sim_config)
    run = simulation_run_config(sim_config)
    processor = TableProcessor()
    long = processor.ingest_longitudinal(StringIO(data.longitudinal.to_csv(index=False)), "id", "time",
                                         [m.name for m in run.markers])
    fixed = processor.ingest_fixed(StringIO(data.fixed.to_csv(index=False)), "id", run.fixed_schema)
    outcome = processor.ingest_outcome(StringIO(data.outcome.to_csv(index=False)), "id", run.outcome)
    return validate_inputs(long, fixed, outcome, run.markers, run.fixed_schema, Hyperparams(**hyperparams))


@pytest.fixture(scope="module")
def recovery():
    dataset = simulated_dataset(SimConfig(n_subjects=200), ntree=25, mtry=10, nodesize=1, seed=1)
    forest = ForestEngine().grow_forest(dataset)
    return dataset, forest


@pytest.mark.slow
class TestSimulationRecovery:
    """Test that the informative random effects of simulated data are found"""

    def test_informative_features_have_lowest_depth(self, recovery):
        _, forest = recovery
        depth = ImportanceEngine().compute_min_depth(forest)
        ranked = sorted(depth.feature_depth, key=depth.feature_depth.get)
        assert set(ranked[:2]) == {"marker1.bi0", "marker2.bi1"}

    def test_informative_markers_beat_noise_covariates(self, recovery):
        dataset, forest = recovery
        vimp = ImportanceEngine().compute_vimp(forest, dataset, seed=1).as_dict()
        noise = max(vimp[name] for name in ("cont_covar1", "cont_covar2", "bin_covar1", "bin_covar2"))
        assert vimp["marker1"] > noise
        assert vimp["marker2"] > noise
