"""Tests for compact sets, entropy, dimensions and the escape integral."""
import math
from fractions import Fraction

import numpy as np
import pytest

from sheetslice.core.setkit import (
    CompactSet1D,
    Decomposition,
    MeasureFunction,
    PsiFunction,
    check_entropy_content,
    check_entropy_doubling,
    critical_alpha,
    entropy_dimension,
    eval_phi_trace,
    fin_loc_classify,
    hausdorff_measure_upper,
    kolmogorov_entropy,
    minkowski_content,
    minkowski_dimension,
    packing_dimension,
    random_compact_set,
    upsilon,
)
from sheetslice.errors import DomainError, InconclusiveError
from sheetslice.utils.rng import derive_rng


class TestCompactSet1D:
    """Test construction and parsing."""

    def test_merges_overlaps(self):
        F = CompactSet1D.of((1, 2), (1.5, 3), (5, 5))
        assert F.intervals == ((1, 3), (5, 5))

    def test_text_round_trip(self):
        F = CompactSet1D.from_text("1,1.5;2")
        assert F.intervals == ((1, Fraction(3, 2)), (2, 2))
        assert CompactSet1D.from_text(F.to_text()) == F

    def test_rejects_reversed_interval(self):
        with pytest.raises(DomainError):
            CompactSet1D.of((2, 1))

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            CompactSet1D.of((-1, 1))

    def test_unparsable(self):
        with pytest.raises(DomainError):
            CompactSet1D.from_text("1,2,3")

    def test_queries(self, interval, four_points):
        assert interval.contains(1.5)
        assert not interval.contains(2.5)
        assert four_points.is_finite
        assert four_points.issubset(interval)
        assert interval.length == 1
        assert interval.bounds == (1, 2)

    def test_grid(self, interval, four_points):
        assert np.allclose(interval.grid(0.25), [1.0, 1.25, 1.5, 1.75, 2.0])
        assert np.allclose(four_points.grid(0.1), [1.0, 1.25, 1.5, 1.75])

    def test_random_set_in_range(self):
        F = random_compact_set(derive_rng(0, 1))
        assert not F.is_empty
        assert F.bounds[0] > 0


class TestMinkowskiContent:
    """Test grid-cell counts."""

    def test_point(self):
        F = CompactSet1D.from_points([0.25])
        assert all(minkowski_content(F, n) == 1 for n in (1, 3, 100))

    def test_interval(self, interval):
        assert minkowski_content(interval, 4) == 5

    def test_two_short_intervals(self):
        # cell [1, 1.5) meets [1, 1.1]; cells [1.5, 2) and [2, 2.5) meet [1.9, 2]
        F = CompactSet1D.of((1, 1.1), (1.9, 2))
        assert minkowski_content(F, 2) == 3

    def test_zero_n(self, interval):
        with pytest.raises(DomainError):
            minkowski_content(interval, 0)


class TestKolmogorovEntropy:
    """Test maximal separated subsets."""

    def test_interval(self, interval):
        count, points = kolmogorov_entropy(interval, 0.5)
        assert count == 3
        assert points == [1, Fraction(3, 2), 2]

    def test_singleton(self):
        assert kolmogorov_entropy(CompactSet1D.from_points([3]), 0.1)[0] == 1

    def test_empty(self):
        assert kolmogorov_entropy(CompactSet1D(), 0.1) == (0, [])

    def test_witness_is_separated(self):
        F = CompactSet1D.from_text("1,1.3;1.35,2;2.5")
        count, points = kolmogorov_entropy(F, Fraction(1, 7))
        assert count == len(points)
        assert all(b - a >= Fraction(1, 7) for a, b in zip(points, points[1:]))
        assert all(F.contains(p) for p in points)

    def test_nonpositive_eps(self, interval):
        with pytest.raises(DomainError):
            kolmogorov_entropy(interval, 0)


class TestEntropyInequalities:
    """Test the content and doubling inequalities."""

    def test_interval(self, interval):
        assert check_entropy_content(interval, 4)
        assert check_entropy_doubling(interval, 0.1)

    def test_two_points(self):
        F = CompactSet1D.from_points([1, 1.3])
        assert check_entropy_doubling(F, 0.2)

    def test_random_sets(self):
        rng = derive_rng(7, 0)
        for _ in range(200):
            F = random_compact_set(rng)
            n = int(rng.integers(2, 1025))
            assert check_entropy_content(F, n)
            assert check_entropy_doubling(F, Fraction(1, n))


class TestDimensions:
    """Test Minkowski, entropy and packing dimension estimates."""

    def test_interval(self, interval):
        est = minkowski_dimension(interval, [2 ** j for j in range(4, 13)])
        assert est.upper == pytest.approx(1.0, abs=0.02)
        assert est.lower <= est.upper

    def test_finite_set(self):
        F = CompactSet1D.from_points([1, 1.2, 1.4, 1.6, 1.8])
        est = minkowski_dimension(F, [2 ** j for j in range(4, 13)])
        assert est.upper == pytest.approx(0.0, abs=0.02)

    def test_harmonic_sequence(self):
        points = 1.0 + np.concatenate([[0.0], 1.0 / np.arange(1, 10 ** 6 + 1)])
        est = minkowski_dimension(points, [2 ** j for j in range(4, 13)])
        assert est.upper == pytest.approx(0.5, abs=0.05)

    def test_needs_three_scales(self, interval):
        with pytest.raises(DomainError):
            minkowski_dimension(interval, [4, 8])

    def test_entropy_dimension(self, interval):
        est = entropy_dimension(interval, [2.0 ** -j for j in range(4, 13)])
        assert est.upper == pytest.approx(1.0, abs=0.02)

    def test_packing(self, interval):
        n_values = [2 ** j for j in range(4, 13)]
        assert packing_dimension(Decomposition((interval,)), n_values) == pytest.approx(1.0, abs=0.02)
        points = Decomposition(tuple(CompactSet1D.from_points([p]) for p in (1, 1.5, 2)))
        assert packing_dimension(points, n_values) == 0.0
        mixed = Decomposition((CompactSet1D.of((1, 1.5)), CompactSet1D.from_points([3, 4])))
        assert packing_dimension(mixed, n_values) == pytest.approx(1.0, abs=0.02)


class TestMeasureFunctions:
    """Test gauges and Hausdorff cover bounds."""

    def test_phi_trace_values(self):
        assert eval_phi_trace(math.exp(-1), 3) == pytest.approx(1.0)
        assert eval_phi_trace(math.exp(-4), 2) == pytest.approx(1 / 64)

    def test_phi_trace_dimension(self):
        with pytest.raises(DomainError):
            eval_phi_trace(0.1, 4)

    def test_unit_interval_cover(self):
        F = CompactSet1D.of((0, 1))
        m = 16
        assert hausdorff_measure_upper(F, MeasureFunction.power(1.0), 1 / (2 * m)) == pytest.approx(0.5)

    def test_singleton_cover_vanishes(self):
        F = CompactSet1D.from_points([1])
        phi = MeasureFunction.power(0.5)
        assert hausdorff_measure_upper(F, phi, 1e-8) == pytest.approx(1e-4)

    def test_point_cloud_cover(self):
        bound = hausdorff_measure_upper(np.array([0.0, 0.1, 1.0]), MeasureFunction.power(1.0), 0.1)
        assert bound == pytest.approx(0.2)

    def test_custom_must_double(self):
        with pytest.raises(DomainError):
            MeasureFunction.custom(lambda x: math.exp(-1 / x), 2.0, 0.1)


class TestPsiFunction:
    """Test escape gauges."""

    def test_psi_alpha(self):
        psi = PsiFunction.psi_alpha(2.0)
        assert psi(math.e ** 4) == pytest.approx(4.0 ** (2 / 2))

    def test_table_rejects_constant_tail(self):
        with pytest.raises(DomainError):
            PsiFunction.table([1, 10, 100], [1, 2, 2])

    def test_table_extrapolates(self):
        psi = PsiFunction.table([1, 10], [1, 10])
        assert psi(1000.0) == pytest.approx(1000.0)

    def test_scaled(self):
        psi = PsiFunction.psi_alpha(1.0).scaled(3.0)
        assert psi(math.e) == pytest.approx(3.0)


class TestUpsilon:
    """Test the escape integral and its classification."""

    def test_interval_small_alpha_finite(self, interval):
        assert upsilon(interval, PsiFunction.psi_alpha(0.5), 5, nodes=200).classification == "finite"

    def test_interval_large_alpha_infinite(self, interval):
        assert upsilon(interval, PsiFunction.psi_alpha(2.0), 5, nodes=200).classification == "infinite"

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    def test_scaling_robust(self, interval, alpha):
        psi = PsiFunction.psi_alpha(alpha)
        expected = upsilon(interval, psi, 5, nodes=200).classification
        for r in (0.01, 100.0):
            assert upsilon(interval, psi.scaled(r), 5, nodes=200).classification == expected

    def test_table_is_inconclusive(self, interval):
        result = upsilon(interval, PsiFunction.table([1, 10], [1, 5]), 5, nodes=200)
        assert result.classification == "inconclusive"
        assert result.value > 0

    def test_low_dimension(self, interval):
        with pytest.raises(DomainError):
            upsilon(interval, PsiFunction.psi_alpha(1.0), 2)

    def test_critical_alpha(self, interval, four_points):
        assert critical_alpha(interval, 7) == 3.0
        assert critical_alpha(four_points, 7) == 5.0

    def test_fin_loc(self, interval):
        assert fin_loc_classify(Decomposition((interval,)), PsiFunction.psi_alpha(0.5), 5)
        assert not fin_loc_classify(Decomposition((interval,)), PsiFunction.psi_alpha(2.0), 5)
        points = Decomposition((CompactSet1D.from_points([1]), CompactSet1D.from_points([2])))
        assert fin_loc_classify(points, PsiFunction.psi_alpha(2.0), 5)

    def test_fin_loc_needs_tail_model(self, interval):
        with pytest.raises(InconclusiveError):
            fin_loc_classify(Decomposition((interval,)), PsiFunction.table([1, 10], [1, 5]), 5)
