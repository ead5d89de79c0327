"""
Tests for model archive persistence and report writers.
"""

import json

import numpy as np
import pytest

from src.app import writers
from src.app.archive import check_training_data, load_archive, save_archive
from src.forest.forest_engine import ForestEngine
from src.importance.importance_engine import ImportanceEngine, importance_report
from src.models.data import OutcomeType
from src.utils.audit import AuditAction
from src.utils.errors import DataMismatch, InvalidConfig
from tests.conftest import build_dataset


@pytest.fixture(scope="module")
def grown():
    dataset = build_dataset(OutcomeType.SURVIVAL, n_subjects=30, ntree=2)
    return dataset, ForestEngine().grow_forest(dataset)


class TestArchive:
    """Test saving and loading model archives"""

    def test_round_trip(self, grown, tmp_path, audit_logger):
        _, forest = grown
        digest = save_archive(forest, tmp_path / "model.json", audit_logger)
        loaded, loaded_digest = load_archive(tmp_path / "model.json", audit_logger)
        assert loaded_digest == digest
        assert loaded.model_dump() == forest.model_dump()
        actions = [r.action for r in audit_logger.get_audit_trail()]
        assert actions == [AuditAction.ARCHIVE_WRITTEN, AuditAction.ARCHIVE_LOADED]

    def test_identical_forests_give_identical_bytes(self, grown, tmp_path):
        dataset, forest = grown
        save_archive(forest, tmp_path / "a.json")
        save_archive(ForestEngine().grow_forest(dataset), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_loaded_forest_predicts_the_same(self, grown, tmp_path):
        dataset, forest = grown
        save_archive(forest, tmp_path / "model.json")
        loaded, _ = load_archive(tmp_path / "model.json")
        engine = ForestEngine()
        first = engine.predict_new(forest, dataset.predictors, landmark=1.0)
        second = engine.predict_new(loaded, dataset.predictors, landmark=1.0)
        assert first.pred_indiv == second.pred_indiv

    def test_missing_and_foreign_files(self, tmp_path):
        with pytest.raises(InvalidConfig):
            load_archive(tmp_path / "absent.json")
        (tmp_path / "other.json").write_text(json.dumps({"format": "something"}), encoding="utf-8")
        with pytest.raises(InvalidConfig):
            load_archive(tmp_path / "other.json")
        (tmp_path / "broken.json").write_text("{", encoding="utf-8")
        with pytest.raises(InvalidConfig):
            load_archive(tmp_path / "broken.json")

    def test_newer_version_is_rejected(self, grown, tmp_path):
        _, forest = grown
        payload = json.loads(forest.model_dump_json())
        payload["version"] = 99
        (tmp_path / "future.json").write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(InvalidConfig):
            load_archive(tmp_path / "future.json")

    def test_training_data_check(self, grown):
        dataset, forest = grown
        check_training_data(forest, dataset)
        with pytest.raises(DataMismatch):
            check_training_data(forest, build_dataset(OutcomeType.SURVIVAL, n_subjects=30, seed=1, ntree=2))


class TestWriters:
    """Test report tables"""

    def test_prediction_frames(self, grown):
        dataset, forest = grown
        result = ForestEngine().predict_new(forest, dataset.predictors)
        frame = writers.prediction_frame(result)
        assert frame.columns.tolist() == ["id", "time", "cif"]
        assert len(frame) == dataset.n_subjects * len(result.times)
        leaves = writers.leaf_frame(result)
        assert leaves.columns.tolist() == ["id", "tree1", "tree2"]
        curve = writers.subject_curve(result, dataset.subject_ids[3])
        assert curve["value"].tolist() == result.pred_indiv[3]

    def test_oob_frames_carry_hash(self, grown):
        dataset, forest = grown
        oob = ForestEngine().compute_oob_error(forest, dataset, archive_hash="h")
        per_subject, summary = writers.oob_frames(oob)
        assert len(per_subject) == len(oob.subject_ids)
        assert summary.loc[0, "archive_hash"] == "h"
        assert summary.loc[0, "oob_error"] == pytest.approx(oob.oob_error)

    def test_depth_tables(self, grown):
        _, forest = grown
        result = ImportanceEngine().compute_min_depth(forest, "h")
        frame = writers.depth_tree_frame(result)
        assert frame.columns.tolist() == ["tree", "name", "depth", "count"]
        assert frame["count"].notna().all()
        assert writers.depth_tree_frame(result, by_feature=True)["count"].isna().all()
        text = writers.depth_report(result, importance_report(result), importance_report(result, by_feature=True))
        assert text.startswith("Minimal depth over 2 trees")
        assert "Archive: h" in text

    def test_write_table_uses_na(self, tmp_path):
        import pandas as pd
        path = writers.write_table(pd.DataFrame({"a": [1.0, np.nan]}), tmp_path / "sub" / "t.csv")
        assert path.read_text(encoding="utf-8").splitlines() == ["a", "1.0", "NA"]

    def test_parsers(self):
        assert writers.parse_id_list(" 1, 2,,3 ") == ["1", "2", "3"]
        assert writers.parse_id_list(None) == []
        assert writers.parse_groups(["a=x1,m1", "b=grp"]) == {"a": ["x1", "m1"], "b": ["grp"]}
