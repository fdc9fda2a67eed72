"""Tests for tallies, reports, the run harness and report merging."""
import math

import pytest

from sheetslice.errors import DomainError, MergeError
from sheetslice.experiments import EXPERIMENTS, RunContext, make_config, merge, run
from sheetslice.experiments.harness import Experiment, count_hits, get_experiment
from sheetslice.experiments.report import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    ExperimentReport,
    Tally,
    half_width,
    pool_tallies,
    ratio_interval,
)


def _report(**checks) -> ExperimentReport:
    report = ExperimentReport("x", {}, "hash", 0, [(0, 1)])
    for name, verdict in checks.items():
        report.check(name, verdict)
    return report


class TestTally:
    """Test tally estimates and pooling."""

    def test_proportion(self):
        t = Tally.proportion("hit", 0.1, 30, 100)
        estimate, lo, hi, n = t.estimate()
        assert estimate == 0.3 and n == 100
        assert lo < 0.3 < hi
        assert half_width(t) > 0

    def test_empty_proportion(self):
        estimate, lo, hi, n = Tally.proportion("hit", 0.1, 0, 0).estimate()
        assert math.isnan(estimate) and (lo, hi, n) == (0.0, 1.0, 0)

    def test_mean_uses_trial_order(self):
        t = Tally.mean("m", 0, {2: 3.0, 0: 1.0, 1: 2.0})
        assert t.estimate()[0] == pytest.approx(2.0)
        assert t.stderr() == pytest.approx(1.0 / math.sqrt(3))

    def test_fixed(self):
        t = Tally.fixed("v", 1, 0.5)
        assert t.estimate() == (0.5, 0.5, 0.5, 1)
        assert t.stderr() == 0.0

    def test_pool_proportions(self):
        pooled = Tally.proportion("hit", 0.1, 3, 10).pooled(Tally.proportion("hit", 0.1, 5, 20))
        assert (pooled.successes, pooled.n) == (8, 30)

    def test_pool_means(self):
        pooled = Tally.mean("m", 0, {0: 1.0}).pooled(Tally.mean("m", 0, {1: 3.0}))
        assert pooled.values == {0: 1.0, 1: 3.0}

    def test_pool_overlap(self):
        with pytest.raises(MergeError):
            Tally.mean("m", 0, {0: 1.0}).pooled(Tally.mean("m", 0, {0: 3.0}))

    def test_pool_fixed_mismatch(self):
        with pytest.raises(MergeError):
            Tally.fixed("v", 0, 1.0).pooled(Tally.fixed("v", 0, 2.0))

    def test_pool_key_mismatch(self):
        with pytest.raises(MergeError):
            Tally.proportion("a", 0, 1, 2).pooled(Tally.proportion("b", 0, 1, 2))

    def test_pool_tallies_commutes(self):
        a = [Tally.proportion("hit", 0.2, 1, 4), Tally.proportion("hit", 0.1, 2, 4)]
        b = [Tally.proportion("hit", 0.1, 1, 4)]
        left, right = pool_tallies(a, b), pool_tallies(b, a)
        assert [(t.key, t.successes, t.n) for t in left] == \
            [(t.key, t.successes, t.n) for t in right]

    def test_ratio_interval(self):
        num, den = Tally.proportion("a", 0, 20, 100), Tally.proportion("b", 0, 40, 100)
        both = Tally.proportion("ab", 0, 20, 100)
        ratio, lo, hi = ratio_interval(num, den, both)
        assert ratio == pytest.approx(0.5)
        assert lo < 0.5 < hi

    def test_ratio_without_denominator(self):
        empty = Tally.proportion("b", 0, 0, 100)
        assert math.isnan(ratio_interval(empty, empty, empty)[0])


class TestReport:
    """Test report outcome and rows."""

    def test_outcomes(self):
        assert _report(a=True).outcome == PASS
        assert _report(a=True, b=INCONCLUSIVE).outcome == INCONCLUSIVE
        assert _report(a=False, b=INCONCLUSIVE).outcome == FAIL

    def test_failed_status(self):
        report = _report(a=True)
        report.status = "failed"
        assert report.outcome == FAIL

    def test_rows_sorted(self):
        report = _report()
        report.add([Tally.fixed("b", 1, 0.0), Tally.fixed("a", 2, 0.0), Tally.fixed("a", 1, 0.0)])
        assert [r["param"] for r in report.rows()] == ["a=1", "a=2", "b=1"]

    def test_notes_deduplicated(self):
        report = _report()
        report.note("same")
        report.note("same")
        assert report.notes == ["same"]

    def test_missing_tally(self):
        with pytest.raises(KeyError):
            _report().tally("absent", 0)


class TestHarness:
    """Test run, registry and merge."""

    def test_unknown_experiment(self):
        with pytest.raises(DomainError):
            get_experiment("no_such_experiment")

    def test_count_hits(self):
        assert list(count_hits([0.1, 0.3, 0.5], [0.2, 0.5])) == [1, 3]

    def test_run_is_deterministic(self):
        cfg = make_config("entropy_checks", {"trials": 4, "scales": 3, "seed": 5})
        a, b = run(cfg), run(cfg, RunContext(threads=4))
        assert [(t.key, t.successes) for t in a.tallies] == [(t.key, t.successes) for t in b.tallies]
        assert a.outcome == PASS

    def test_failure_gives_partial_report(self, monkeypatch):
        def explode(cfg, context):
            raise RuntimeError("boom")

        monkeypatch.setitem(EXPERIMENTS, "explode",
                            Experiment("explode", explode, lambda report, cfg: None))
        report = run(make_config("explode", {}))
        assert report.status == "failed"
        assert "boom" in report.error
        assert report.outcome == FAIL

    def test_merge_pools_disjoint_ranges(self):
        cfg = make_config("entropy_checks", {"trials": 3, "scales": 2, "seed": 1})
        first, second = run(cfg), run(cfg.with_trials(3, 3))
        merged = merge(first, second)
        assert merged.trial_ranges == [(0, 3), (3, 6)]
        assert merged.n_trials == 6
        assert merged.tally("content", 0).n == 12
        assert merged.outcome == PASS

    def test_merge_matches_single_run(self):
        cfg = make_config("covariance_law", {"grid": "4x4", "pairs": 3, "trials": 6, "seed": 2})
        whole = run(cfg)
        parts = merge(run(cfg.with_trials(2, 0)), run(cfg.with_trials(4, 2)))
        assert [t.values for t in whole.series("product")] == \
            [t.values for t in parts.series("product")]

    def test_merge_associative(self):
        cfg = make_config("covariance_law", {"grid": "4x4", "pairs": 3, "trials": 2, "seed": 4})
        a, b, c = run(cfg), run(cfg.with_trials(2, 2)), run(cfg.with_trials(3, 4))
        left, right = merge(merge(a, b), c), merge(a, merge(b, c))
        assert left.trial_ranges == right.trial_ranges == [(0, 2), (2, 4), (4, 7)]
        assert [(t.key, t.n, t.successes, t.values) for t in left.tallies] == \
            [(t.key, t.n, t.successes, t.values) for t in right.tallies]
        assert left.checks == right.checks
        assert left.fits == right.fits

    def test_merge_rejects_overlap(self):
        cfg = make_config("entropy_checks", {"trials": 3, "scales": 2})
        with pytest.raises(MergeError):
            merge(run(cfg), run(cfg.with_trials(3, 2)))

    def test_merge_rejects_hash_mismatch(self):
        a = run(make_config("entropy_checks", {"trials": 2, "scales": 2, "seed": 1}))
        b = run(make_config("entropy_checks", {"trials": 2, "trial_start": 2, "scales": 2,
                                               "seed": 2}))
        with pytest.raises(MergeError):
            merge(a, b)

    def test_merge_rejects_name_mismatch(self):
        a = run(make_config("entropy_checks", {"trials": 2, "scales": 2}))
        b = run(make_config("energy_oracle", {"atom_ladder": [8]}))
        with pytest.raises(MergeError):
            merge(a, b)

    def test_merge_rejects_failed(self):
        a = run(make_config("entropy_checks", {"trials": 2, "scales": 2}))
        b = run(make_config("entropy_checks", {"trials": 2, "trial_start": 2, "scales": 2}))
        b.status = "failed"
        with pytest.raises(MergeError):
            merge(a, b)
