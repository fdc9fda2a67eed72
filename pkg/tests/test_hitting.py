"""Tests for the hitting-probability experiments (small trial counts)."""
import numpy as np
import pytest

from sheetslice.errors import DomainError
from sheetslice.experiments import make_config, run
from sheetslice.experiments.report import INCONCLUSIVE


def _hits(report, series):
    return [t.successes for t in report.series(series)]


class TestHitProbBM:
    """Test one Brownian motion against small balls."""

    @pytest.fixture(scope="class")
    def report(self):
        cfg = make_config("hit_prob_bm", {"dim": 3, "r_ladder": [0.1, 0.2, 0.4], "trials": 100,
                                          "steps": 32, "seed": 4})
        return run(cfg)

    def test_tallies(self, report):
        assert report.status == "ok"
        assert [t.param for t in report.series("hit")] == [0.1, 0.2, 0.4]
        assert all(t.n == 100 for t in report.series("hit_fine"))

    def test_hits_grow_with_radius(self, report):
        for series in ("hit", "hit_fine"):
            hits = _hits(report, series)
            assert hits == sorted(hits)

    def test_fit_recorded(self, report):
        fit = report.fits["hit"]
        assert fit["series"] == "hit"
        assert fit["target"] == 1.0
        assert "slope" in report.checks and "grid_consistency" in report.checks

    @pytest.mark.parametrize("layer", [{"dim": 2}, {"steps": 100}, {"r_ladder": []}])
    def test_preconditions(self, layer):
        with pytest.raises(DomainError):
            run(make_config("hit_prob_bm", {"trials": 2, **layer}))

    @pytest.mark.slow
    def test_slope_in_three_dimensions(self):
        cfg = make_config("hit_prob_bm", {"dim": 3, "trials": 100_000, "seed": 1})
        report = run(cfg)
        assert report.fits["hit"]["slope"] == pytest.approx(1.0, abs=0.1)


class TestHitProbTwoBM:
    """Test the conditional hitting of two motions."""

    def test_conditioned_counts(self):
        cfg = make_config("hit_prob_two_bm", {"dim": 3, "r": 0.1, "rho_ladder": [0.2, 0.5, 1.0],
                                              "trials": 200, "steps": 32, "seed": 2})
        report = run(cfg)
        base = report.tally("base", 0.1)
        for t in report.series("cond"):
            assert t.n == base.successes
            assert t.successes <= report.tally("uncond", t.param).successes

    def test_few_conditioning_hits_is_inconclusive(self):
        cfg = make_config("hit_prob_two_bm", {"dim": 5, "r": 0.01, "rho_ladder": [0.5, 1.0],
                                              "trials": 20, "steps": 16})
        assert run(cfg).checks["conditioning"] == INCONCLUSIVE

    @pytest.mark.parametrize("layer", [{"r": 0.3, "rho_ladder": [0.2, 0.5]},
                                       {"rho_ladder": [0.5, 2.0]},
                                       {"dim": 2}])
    def test_preconditions(self, layer):
        with pytest.raises(DomainError):
            run(make_config("hit_prob_two_bm", {"trials": 2, **layer}))


class TestHitProbSheet:
    """Test hitting by sheet slices over a parameter set."""

    @pytest.fixture(scope="class")
    def report(self):
        cfg = make_config("hit_prob_sheet", {"dim": 3, "grid": "16x16", "set": "1,1.5",
                                             "reference_set": "1", "eps_ladder": [0.2, 0.3, 0.5],
                                             "trials": 6, "seed": 3})
        return run(cfg)

    def test_coarse_eps_excluded(self, report):
        assert any("eps = 0.2 excluded" in note for note in report.notes)
        assert any("eps = 0.3 excluded" in note for note in report.notes)
        assert list(report.extras["prediction"]) == [0.5]

    def test_monotone(self, report):
        hits = _hits(report, "hit")
        assert hits == sorted(hits)
        for eps in (0.2, 0.3, 0.5):
            assert report.tally("ref", eps).successes <= report.tally("hit", eps).successes
            assert report.tally("both", eps).successes == report.tally("ref", eps).successes
        assert report.checks["monotone"] == "pass"

    def test_monotone_in_set(self):
        cfg = make_config("hit_prob_sheet", {"dim": 3, "grid": "16x16", "set": "1,2",
                                             "reference_set": "1,1.5",
                                             "eps_ladder": [0.5, 0.75, 1.0], "trials": 6,
                                             "seed": 11})
        report = run(cfg)
        for eps in (0.5, 0.75, 1.0):
            assert report.tally("ref", eps).successes <= report.tally("hit", eps).successes
        assert report.checks["monotone"] == "pass"

    def test_level_ratio_fit(self, report):
        assert report.fits["level_ratio"]["eps"] == 0.5

    def test_set_outside_unit_range(self):
        with pytest.raises(DomainError):
            run(make_config("hit_prob_sheet", {"set": "0.5,1", "trials": 1}))

    def test_width_variant_needs_interval(self):
        with pytest.raises(DomainError):
            run(make_config("hit_prob_sheet", {"set": "1;2", "widths": [0.25], "trials": 1}))

    def test_deterministic(self):
        cfg = make_config("hit_prob_sheet", {"dim": 3, "grid": "16x16", "eps_ladder": [0.5],
                                             "trials": 3, "seed": 9})
        assert _hits(run(cfg), "hit") == _hits(run(cfg), "hit")
        assert np.all(np.array(_hits(run(cfg), "hit")) <= 3)
