"""Tests for the command-line interface."""
import click
import pytest

from sheetslice.cli import CliConfig, main, parse_args
from sheetslice.core.capkit import read_record
from sheetslice.experiments import make_config


def _cfg(config: CliConfig):
    return make_config(config.experiment, *config.layers())


class TestParseArgs:
    """Test command-line parsing."""

    def test_simulate(self):
        config = parse_args(["simulate", "--grid", "256x256", "--dim", "3", "--seed", "7"])
        assert isinstance(config, CliConfig)
        cfg = _cfg(config)
        assert (cfg.name, cfg.grid, cfg.dim, cfg.seed) == ("simulate", "256x256", 3, 7)

    def test_missing_required(self):
        with pytest.raises(click.UsageError) as info:
            parse_args(["simulate", "--grid", "256x256"])
        assert info.value.exit_code == 2

    def test_ladders(self):
        config = parse_args(["hitprob", "--kind", "bm", "--dim", "5", "--r-ladder", "0.05,0.1,0.2"])
        cfg = _cfg(config)
        assert cfg.name == "hit_prob_bm"
        assert cfg.r_ladder == [0.05, 0.1, 0.2]

    def test_bad_ladder(self):
        with pytest.raises(click.BadParameter):
            parse_args(["hitprob", "--r-ladder", "a,b"])

    def test_kind_selects_experiment(self):
        assert parse_args(["zeros", "--kind", "cells"]).experiment == "good_cell_counts"
        assert parse_args(["hitprob", "--kind", "sheet"]).experiment == "hit_prob_sheet"

    def test_flag_seed_beats_file(self, temp_output_dir):
        path = temp_output_dir / "exp.yaml"
        path.write_text("seed: 5\ntrials: 3\n", encoding="utf-8")
        cfg = _cfg(parse_args(["escape", "--config", str(path), "--seed", "9"]))
        assert cfg.seed == 9
        assert cfg.trials == 3
        assert parse_args(["escape", "--config", str(path)]).effective_seed() == 5

    def test_flags_beat_file(self, temp_output_dir):
        path = temp_output_dir / "exp.yaml"
        path.write_text("trials: 3\ndim: 4\n", encoding="utf-8")
        cfg = _cfg(parse_args(["doublepoints", "--config", str(path), "--trials", "7"]))
        assert (cfg.trials, cfg.dim) == (7, 4)

    def test_missing_config_file(self, temp_output_dir):
        with pytest.raises(click.BadParameter):
            parse_args(["escape", "--config", str(temp_output_dir / "absent.yaml")])

    def test_output_is_a_file(self, temp_output_dir):
        path = temp_output_dir / "file.txt"
        path.write_text("x", encoding="utf-8")
        with pytest.raises(click.UsageError):
            parse_args(["capacity", "--out", str(path)])

    def test_check_all_desk(self):
        config = parse_args(["check-all", "--desk", "--seed", "3"])
        assert config.desk and config.effective_seed() == 3


class TestMain:
    """Test exit codes and written files."""

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 2

    def test_missing_dim(self):
        assert main(["simulate"]) == 2

    def test_help(self):
        assert main(["--help"]) == 0

    def test_precondition_is_usage_error(self, temp_output_dir):
        assert main(["hitprob", "--dim", "2", "--trials", "2", "--out", str(temp_output_dir)]) == 2

    def test_unknown_experiment(self, temp_output_dir):
        assert main(["run", "no_such_experiment", "--out", str(temp_output_dir)]) == 2

    def test_capacity_writes_minimizer(self, temp_output_dir):
        code = main(["capacity", "--set", "1,2", "--beta", "0.5", "--atoms", "32",
                     "--out", str(temp_output_dir), "--no-plot"])
        assert code == 0
        written = list((temp_output_dir / "capacity").glob("*/minimizer.txt"))
        assert len(written) == 1
        record = read_record(written[0])
        assert record.info["set"] == "1,2"
        assert (written[0].parent / "report.csv").exists()
        assert (written[0].parent / "header.json").exists()

    def test_simulate_run(self, temp_output_dir):
        code = main(["simulate", "--dim", "2", "--grid", "16x16", "--trials", "3", "--seed", "1",
                     "--out", str(temp_output_dir)])
        assert code in (0, 1, 3)
        assert list((temp_output_dir / "simulate").glob("*/report.csv"))
