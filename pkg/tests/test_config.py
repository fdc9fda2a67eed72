"""Tests for runtime configuration, experiment configs, logging and random streams."""
import logging

import numpy as np
import pytest

from sheetslice.errors import ConfigurationError
from sheetslice.experiments.config import ExperimentConfig, build_config, parse_grid
from sheetslice.utils.config import Config, load_experiment_file
from sheetslice.utils.logger import setup_logging
from sheetslice.utils.rng import derive_rng, stream_id


class TestRuntimeConfig:
    """Test the YAML runtime config."""

    def test_defaults(self, temp_output_dir):
        path = temp_output_dir / "empty.yaml"
        path.write_text("", encoding="utf-8")
        config = Config(path)
        assert config.get("capacity.gap_tol") == 1e-9
        assert config.get("performance.threads") == 1
        assert config.get("missing.key", "fallback") == "fallback"

    def test_partial_override_keeps_siblings(self, temp_output_dir):
        path = temp_output_dir / "partial.yaml"
        path.write_text("capacity:\n  max_iter: 50\n", encoding="utf-8")
        config = Config(path)
        assert config.get("capacity.max_iter") == 50
        assert config.get("capacity.gap_tol") == 1e-9

    def test_source_and_independent_defaults(self, temp_output_dir):
        path = temp_output_dir / "empty.yaml"
        path.write_text("{}", encoding="utf-8")
        first, second = Config(path), Config(path)
        first.config["capacity"]["max_iter"] = 7
        assert first.source == path
        assert second.get("capacity.max_iter") == 100_000

    def test_non_mapping(self, temp_output_dir):
        path = temp_output_dir / "list.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            Config(path)


class TestExperimentFile:
    """Test flat experiment files."""

    def test_keys_normalized(self, temp_output_dir):
        path = temp_output_dir / "exp.yaml"
        path.write_text("r-ladder: [0.1, 0.2]\ntrials: 10\n", encoding="utf-8")
        assert load_experiment_file(path) == {"r_ladder": [0.1, 0.2], "trials": 10}

    def test_missing(self, temp_output_dir):
        with pytest.raises(FileNotFoundError):
            load_experiment_file(temp_output_dir / "absent.yaml")

    def test_nested_rejected(self, temp_output_dir):
        path = temp_output_dir / "nested.yaml"
        path.write_text("grid:\n  ns: 4\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_experiment_file(path)

    def test_unreadable(self, temp_output_dir):
        path = temp_output_dir / "bad.yaml"
        path.write_text("trials: [1, 2\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_experiment_file(path)


class TestExperimentConfig:
    """Test experiment config validation and hashing."""

    def test_parse_grid(self):
        assert parse_grid("256x512") == (256, 512)
        assert parse_grid(" 8 X 4 ") == (8, 4)
        with pytest.raises(ConfigurationError):
            parse_grid("256")

    def test_grid_normalized(self):
        assert ExperimentConfig(name="x", grid="8X8").grid == "8x8"

    def test_set_normalized(self):
        cfg = ExperimentConfig(name="x", set="1.5, 2")
        assert cfg.F.bounds[0] == 1.5
        assert ExperimentConfig(name="x", set=cfg.set).config_hash() == cfg.config_hash()

    def test_hash_ignores_trial_range(self):
        cfg = build_config("x", {"dim": 2, "trials": 10, "seed": 3})
        assert cfg.with_trials(50, 10).config_hash() == cfg.config_hash()
        assert cfg.with_trials(50, 10).trial_range == (10, 60)

    def test_hash_sees_seed(self):
        assert build_config("x", {"seed": 1}).config_hash() != \
            build_config("x", {"seed": 2}).config_hash()

    def test_later_layers_win(self):
        cfg = build_config("x", {"trials": 5, "seed": 9}, {"trials": 7, "seed": None})
        assert cfg.trials == 7
        assert cfg.seed == 9

    def test_dashed_keys(self):
        assert build_config("x", {"trial-start": 4}).trial_start == 4

    @pytest.mark.parametrize("layer", [
        {"unknown": 1},
        {"trials": 0},
        {"r_ladder": [0.2, 0.1]},
        {"eps_ladder": [-0.1, 0.2]},
        {"grid": "1x8"},
        {"set": "2,1"},
        {"dim": 2, "grid": "0x8"},
    ])
    def test_invalid(self, layer):
        with pytest.raises(ConfigurationError):
            build_config("x", layer)

    def test_grid_spec_needs_dim(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(name="x").grid_spec()

    def test_grid_spec(self):
        spec = build_config("x", {"dim": 3, "grid": "64x32", "seed": 5}).grid_spec()
        assert (spec.ns, spec.nt, spec.dim, spec.seed) == (64, 32, 3, 5)


class TestStreams:
    """Test counter-based random streams."""

    def test_same_keys_same_draws(self):
        assert np.array_equal(derive_rng(7, 1, 2).standard_normal(5),
                              derive_rng(7, 1, 2).standard_normal(5))

    def test_keys_separate_streams(self):
        assert not np.array_equal(derive_rng(7, 1, 2).standard_normal(5),
                                  derive_rng(7, 2, 1).standard_normal(5))

    def test_stream_id_stable(self):
        assert stream_id("hit_prob_bm") == stream_id("hit_prob_bm")
        assert 0 <= stream_id("hit_prob_bm") < 2 ** 32
        assert stream_id("a") != stream_id("b")


class TestLogging:
    """Test logging setup."""

    def test_file_handler(self, temp_output_dir):
        log_file = temp_output_dir / "logs" / "run.log"
        setup_logging("DEBUG", log_file)
        logging.getLogger("sheetslice.test").info("hello")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert "hello" in log_file.read_text(encoding="utf-8")
        setup_logging("WARNING")
        assert logging.getLogger().level == logging.WARNING
        assert logging.getLogger("matplotlib").level == logging.WARNING
