"""Tests for experiment configuration"""

from pathlib import Path

import orjson
import pytest

from semcomm_common.enums import DatasetKind
from semcomm_common.exceptions import ConfigurationError
from semcomm_common.settings import SemCommSettings
from semcomm_runner.catalog import DEFAULT_KINDS
from semcomm_runner.config import default_experiment, dump_config, load_config, parse_config


class TestDefaultExperiment:
    """Test suite for the built-in task set"""

    def test_every_kind_registered(self):
        """Test one task and one dataset per kind, ids in order"""
        config = default_experiment()

        assert [spec.name for spec in config.tasks] == [kind.value for kind in DEFAULT_KINDS]
        assert [spec.id for spec in config.tasks] == list(range(len(DEFAULT_KINDS)))
        assert set(config.datasets) == {kind.value for kind in DEFAULT_KINDS}
        config.validate_consistency()

    def test_with_seed_offsets_datasets(self):
        """Test dataset i is seeded with seed + i"""
        config = default_experiment(seed=10)

        assert [spec.seed for spec in config.datasets.values()] == [10 + i for i in range(len(DEFAULT_KINDS))]
        assert config.train.seed == 10 and config.eval.seed == 10


class TestParse:
    """Test suite for JSON documents"""

    def test_dump_parse_round_trip(self, small_experiment):
        """Test a dumped config parses back to an equal config"""
        parsed = parse_config(dump_config(small_experiment))

        assert parsed.model_dump() == small_experiment.model_dump()

    def test_invalid_json(self):
        """Test malformed JSON is a configuration error"""
        with pytest.raises(ConfigurationError, match="not valid JSON"):
            parse_config("{not json")

    def test_unknown_field_names_location(self):
        """Test schema errors carry the offending field"""
        with pytest.raises(ConfigurationError) as exc:
            parse_config(orjson.dumps({"model": {"width": 64, "depth": 3}}))

        assert exc.value.field == "model.depth"

    def test_no_tasks(self):
        """Test an empty task list is refused"""
        with pytest.raises(ConfigurationError, match="no tasks"):
            parse_config("{}")

    def test_missing_dataset(self, small_experiment):
        """Test every task needs a dataset"""
        document = orjson.loads(dump_config(small_experiment))
        del document["datasets"]["mm_xor"]

        with pytest.raises(ConfigurationError, match="has no dataset"):
            parse_config(orjson.dumps(document))

    def test_mismatched_dataset_kind(self, small_experiment):
        """Test a dataset must feed its task's modalities"""
        document = orjson.loads(dump_config(small_experiment))
        document["datasets"]["img_class"]["kind"] = DatasetKind.TEXT_CLASS.value

        with pytest.raises(ConfigurationError):
            parse_config(orjson.dumps(document))

    def test_odd_width(self, small_experiment):
        """Test model geometry is validated before anything runs"""
        document = orjson.loads(dump_config(small_experiment))
        document["model"]["width"] = 13

        with pytest.raises(ConfigurationError):
            parse_config(orjson.dumps(document))

    def test_learning_rate_for_unknown_task(self, small_experiment):
        """Test per-task learning rates must name registered tasks"""
        document = orjson.loads(dump_config(small_experiment))
        document["train"]["learning_rates"] = {"ghost": 1e-3}

        with pytest.raises(ConfigurationError, match="ghost"):
            parse_config(orjson.dumps(document))

    def test_load_from_file(self, small_experiment, tmp_path):
        """Test configs load from disk"""
        path = tmp_path / "experiment.json"
        path.write_bytes(dump_config(small_experiment))

        assert load_config(path).model_dump() == small_experiment.model_dump()


class TestSettings:
    """Test suite for environment overrides"""

    def test_seed_and_output_dir(self, small_experiment):
        """Test SEMCOMM_SEED re-seeds and SEMCOMM_OUTPUT_DIR relocates the run"""
        settings = SemCommSettings(_env_file=None, seed=42, output_dir=Path("/tmp/elsewhere"))

        config = small_experiment.apply_settings(settings)

        assert config.seed == 42 and config.train.seed == 42
        assert config.output_dir == Path("/tmp/elsewhere")

    def test_nothing_set(self, small_experiment):
        """Test an empty environment changes nothing"""
        settings = SemCommSettings(_env_file=None)

        assert small_experiment.apply_settings(settings) is small_experiment
