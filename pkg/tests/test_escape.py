"""Tests for the escape-rate probe."""
import numpy as np
import pytest

from sheetslice.core.setkit import PsiFunction
from sheetslice.errors import DomainError
from sheetslice.experiments import make_config, run
from sheetslice.experiments.escape import MIN_EPOCHS, epoch_weights
from sheetslice.experiments.report import INCONCLUSIVE

SMALL = {"dim": 3, "alpha_ladder": [0.5], "epochs": 8, "steps": 16, "columns": 2, "trials": 20,
         "seed": 6}


class TestEpochWeights:
    """Test the per-epoch gauge weights."""

    def test_shape_and_sign(self):
        w = epoch_weights(PsiFunction.psi_alpha(1.0), 4, 8)
        assert w.shape == (4, 9)
        assert np.all(w > 0)

    def test_first_epoch_flat_gauge(self):
        # psi_alpha is 1 on [1, e], so the weight is u^{-1/2}
        w = epoch_weights(PsiFunction.psi_alpha(1.0), 1, 4)
        assert np.allclose(w[0], 1.0 / np.sqrt(1.0 + np.arange(5) / 4))


class TestEscapeProbe:
    """Test the probe on a small run."""

    @pytest.fixture(scope="class")
    def report(self):
        return run(make_config("escape_rate_probe", SMALL))

    def test_series(self, report):
        assert report.status == "ok"
        for series in ("fixed_a0.5", "over_set_a0.5"):
            tallies = report.series(series)
            assert [t.param for t in tallies] == list(range(8))
            assert all(t.n == 20 for t in tallies)

    def test_proportions_bounded(self, report):
        for t in report.series("over_set_a0.5"):
            assert 0 <= t.successes <= t.n

    def test_critical_rates(self, report):
        assert report.fits["critical"] == {"fixed_s": 1.0, "over_set": -1.0}

    def test_candidate_columns(self, report):
        candidates = report.extras["candidate_columns"]
        assert len(candidates) <= 3
        assert all(1.0 <= s <= 2.0 for s in candidates)

    def test_too_few_epochs(self):
        report = run(make_config("escape_rate_probe", {**SMALL, "epochs": MIN_EPOCHS - 1}))
        assert report.checks["epochs"] == INCONCLUSIVE

    def test_tabulated_gauge_unclassified(self):
        layer = {**SMALL, "alpha_ladder": [], "psi_table": [[1.0, 1e6], [1.0, 50.0]]}
        report = run(make_config("escape_rate_probe", layer))
        assert "alpha_hat" not in report.fits["fixed_table"]
        assert "fixed_table" not in report.checks

    @pytest.mark.parametrize("layer", [
        {"dim": 2},
        {"steps": 24},
        {"alpha_ladder": [], "psi_table": None},
        {"psi_table": [[1.0, 2.0]]},
        {"set": "0,1"},
    ])
    def test_preconditions(self, layer):
        with pytest.raises(DomainError):
            run(make_config("escape_rate_probe", {**SMALL, **layer}))
