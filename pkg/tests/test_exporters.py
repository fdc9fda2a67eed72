"""Tests for the CSV/JSON report writer and the log-log plotter."""
import json
import math

import numpy as np
import pandas as pd
import pytest

from sheetslice.exporters import LogLogPlotter, ReportCSVWriter, report_dir
from sheetslice.exporters.csv_report import CSV_COLUMNS, HEADER_VERSION, sanitize
from sheetslice.experiments.report import ExperimentReport, Tally


@pytest.fixture
def report():
    report = ExperimentReport("hit_prob_bm", {"dim": 3, "seed": 1}, "ab" * 32, 1, [(0, 100)])
    report.add([Tally.proportion("hit", r, h, 100) for r, h in ((0.1, 5), (0.2, 11), (0.4, 19))])
    report.add([Tally.fixed("energy", 0, math.nan)])
    report.fits["hit"] = {"series": "hit", "slope": 0.95, "intercept": math.log(0.5)}
    report.check("slope", True)
    report.extras["thresholds"] = {64: np.float64(0.5)}
    return report


class TestSanitize:
    """Test JSON sanitizing."""

    def test_non_finite(self):
        assert sanitize([math.nan, math.inf, -math.inf]) == ["nan", "inf", "-inf"]

    def test_numpy_values(self):
        assert sanitize({1: np.int64(3), "a": np.bool_(True), "b": np.arange(2)}) == \
            {"1": 3, "a": True, "b": [0, 1]}


class TestReportCSVWriter:
    """Test report rendering and writing."""

    def test_render_deterministic(self, report):
        writer = ReportCSVWriter()
        assert writer.render(report) == writer.render(report)

    def test_write(self, report, temp_output_dir):
        target = ReportCSVWriter().write(report, temp_output_dir)
        assert target == report_dir(report, temp_output_dir)
        assert target == temp_output_dir / "hit_prob_bm" / report.config_hash

        frame = pd.read_csv(target / "report.csv")
        assert list(frame.columns) == CSV_COLUMNS
        assert list(frame["param"]) == ["energy=0", "hit=0.1", "hit=0.2", "hit=0.4"]
        assert frame.loc[1, "estimate"] == pytest.approx(0.05)
        assert frame.loc[1, "n_trials"] == 100

        header = json.loads((target / "header.json").read_text(encoding="utf-8"))
        assert header["version"] == HEADER_VERSION
        assert header["outcome"] == "pass"
        assert header["trial_ranges"] == [[0, 100]]
        assert header["extras"]["thresholds"] == {"64": 0.5}

    def test_failed_report_still_written(self, report, temp_output_dir):
        report.status = "failed"
        report.error = "RuntimeError: boom"
        target = ReportCSVWriter().write(report, temp_output_dir)
        header = json.loads((target / "header.json").read_text(encoding="utf-8"))
        assert header["status"] == "failed"
        assert header["outcome"] == "fail"


class TestLogLogPlotter:
    """Test SVG plots."""

    def test_plottable(self, report):
        assert LogLogPlotter.plottable(report) == ["hit"]

    def test_plot_written(self, report, temp_output_dir):
        path = LogLogPlotter().plot(report, temp_output_dir)
        assert path == report_dir(report, temp_output_dir) / "plot.svg"
        assert path.read_text(encoding="utf-8").lstrip().startswith("<?xml")

    def test_plot_reproducible(self, report, temp_output_dir):
        first = LogLogPlotter().plot(report, temp_output_dir / "a").read_bytes()
        second = LogLogPlotter().plot(report, temp_output_dir / "b").read_bytes()
        assert first == second

    def test_nothing_to_plot(self, temp_output_dir):
        empty = ExperimentReport("x", {}, "0" * 64, 0, [(0, 1)])
        assert LogLogPlotter().plot(empty, temp_output_dir) is None
