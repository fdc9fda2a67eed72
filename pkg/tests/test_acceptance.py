"""Tests for the acceptance suites and the determinism experiment."""
import pytest

from sheetslice.experiments import EXPERIMENTS, make_config, run
from sheetslice.experiments.acceptance import (
    DESK_SUITE,
    QUICK_OVERRIDES,
    QUICK_SUITE,
    SuiteEntry,
    combined_outcome,
    run_suite,
)
from sheetslice.experiments.report import FAIL, INCONCLUSIVE, PASS, ExperimentReport


def _with_outcome(verdict: str) -> ExperimentReport:
    report = ExperimentReport("x", {}, "h", 0, [(0, 1)])
    report.check("c", verdict)
    return report


class TestSuites:
    """Test suite construction."""

    def test_every_entry_is_registered(self):
        for entry in DESK_SUITE:
            assert entry.experiment in EXPERIMENTS

    def test_every_entry_builds_a_valid_config(self):
        for entry in QUICK_SUITE + DESK_SUITE:
            make_config(entry.experiment, entry.overrides)

    def test_quick_keeps_entry_dimension(self):
        quick = {e.label: e for e in QUICK_SUITE}
        assert quick["cells_d1"].overrides["dim"] == 1
        assert quick["bm_d5"].overrides["dim"] == 5
        assert quick["bm_d5"].overrides["trials"] == QUICK_OVERRIDES["hit_prob_bm"]["trials"]

    def test_labels_unique(self):
        labels = [e.label for e in DESK_SUITE]
        assert len(labels) == len(set(labels))

    def test_combined_outcome(self):
        assert combined_outcome([_with_outcome(PASS)]) == PASS
        assert combined_outcome([_with_outcome(PASS), _with_outcome(INCONCLUSIVE)]) == INCONCLUSIVE
        assert combined_outcome([_with_outcome(INCONCLUSIVE), _with_outcome(FAIL)]) == FAIL

    def test_run_suite_applies_layers(self):
        entries = [SuiteEntry("energy", "energy_oracle", {"atom_ladder": [16, 32]})]
        results = run_suite(entries, [{"seed": 11}])
        assert results[0][0] is entries[0]
        assert results[0][1].seed == 11


class TestDeterminism:
    """Test the cross-thread determinism experiment."""

    def test_small_members(self):
        report = run(make_config("determinism", {"members": ["entropy_checks"]}))
        assert report.checks["determinism"] == PASS
        assert report.fits["determinism"]["mismatched"] == []

    @pytest.mark.slow
    def test_quick_members(self):
        report = run(make_config("determinism", QUICK_OVERRIDES["determinism"]))
        assert report.outcome == PASS
