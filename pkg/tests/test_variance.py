"""Variance series: exact anchors, tail fitting, wp polynomial mode."""

import math
import random
from fractions import Fraction

import pytest

from toralstats import (TrigPoly, annealed_variance, correlation,
                        default_pair, finite_horizon_variance,
                        random_real_polynomial, variance_polynomial,
                        variance_sweep)
from toralstats.variance import fit_geometric_tail

COS_X1 = TrigPoly.cosine((1, 0))
COBOUNDARY = COS_X1 - TrigPoly.cosine((1, 1))
WPS = (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4),
       Fraction(1))


@pytest.fixture(scope="module")
def gens():
    return default_pair()


class TestExactAnchors:
    @pytest.mark.parametrize("wp", WPS)
    def test_cosine_variance_is_half(self, gens, wp):
        res = annealed_variance(gens, COS_X1, wp)
        assert res.sigma2 == Fraction(1, 2)
        assert isinstance(res.sigma2, Fraction)
        assert res.exact and res.certified
        assert res.tail_bound == 0.0
        assert res.n_used <= 1

    @pytest.mark.parametrize("wp", WPS)
    def test_coboundary_variance_is_zero(self, gens, wp):
        res = annealed_variance(gens, COBOUNDARY, wp)
        assert res.sigma2 == 0
        assert res.exact and res.certified
        assert tuple(res.series.terms) == (Fraction(1), Fraction(-1, 2))

    def test_series_matches_correlation_terms(self, gens):
        rng = random.Random(13)
        for _ in range(5):
            f = random_real_polynomial(rng, max_index=2, n_pairs=3)
            if not f.coeffs:
                continue
            wp = Fraction(2, 5)
            res = annealed_variance(gens, f, wp)
            assert res.exact  # small supports prune fast
            for n, term in enumerate(res.series.terms):
                assert term == correlation(gens, f, n, wp).value
            total = res.series.terms[0] + 2 * sum(res.series.terms[1:])
            assert res.sigma2 == total


class TestFiniteHorizon:
    def test_cosine_horizon_independent(self, gens):
        for n in (1, 2, 16, 1024):
            fh = finite_horizon_variance(gens, COS_X1, n, Fraction(1, 2))
            assert fh.value == Fraction(1, 2) and fh.exact

    @pytest.mark.parametrize("n", [1, 2, 4, 16, 4096])
    def test_coboundary_horizon_is_one_over_n(self, gens, n):
        # c_0 = 1, c_1 = -1/2: E[S_N^2]/N = 1 - (1 - 1/N) = 1/N
        fh = finite_horizon_variance(gens, COBOUNDARY, n, Fraction(1, 2))
        assert fh.value == Fraction(1, n) and fh.exact

    def test_horizon_approaches_sigma2(self, gens):
        f = random_real_polynomial(random.Random(14), max_index=2, n_pairs=3)
        res = annealed_variance(gens, f, Fraction(1, 2))
        fh = finite_horizon_variance(gens, f, 1 << 20, Fraction(1, 2))
        assert float(fh.value) == pytest.approx(float(res.sigma2), abs=1e-4)

    def test_validation(self, gens):
        with pytest.raises(ValueError):
            finite_horizon_variance(gens, COS_X1, 0, 0.5)


class TestTailFit:
    def test_geometric_terms_fit_closed_form(self):
        r = 0.25
        terms = [r ** n for n in range(6)]
        # rate recovered exactly on log-linear data; bound is
        # 2 (safety) * 2 (series) * last * r / (1 - r)
        expected = 4.0 * terms[-1] * r / (1.0 - r)
        assert fit_geometric_tail(terms) == pytest.approx(expected, rel=1e-9)

    def test_flat_or_growing_is_unbounded(self):
        assert fit_geometric_tail([1.0, 1.0, 1.0, 1.0]) == math.inf
        assert fit_geometric_tail([1.0, 2.0, 4.0]) == math.inf
        assert fit_geometric_tail([0.0, 0.0, 1.0]) == math.inf

    def test_uncertified_when_capped(self, gens):
        f = TrigPoly.cosine((55, -34))
        res = annealed_variance(gens, f, Fraction(1, 2), depth_cap=5)
        assert not res.exact
        assert not res.certified


class TestVariancePolynomial:
    def test_cosine_is_constant(self, gens):
        vp = variance_polynomial(gens, COS_X1, 4)
        assert vp.coefficients == (Fraction(1, 2),)
        assert vp.degree == 0
        assert vp.evaluate(Fraction(1, 3)) == Fraction(1, 2)

    def test_coboundary_collapses_to_zero(self, gens):
        vp = variance_polynomial(gens, COBOUNDARY, 2)
        assert vp.coefficients == (Fraction(0),)

    def test_matches_pointwise_variance(self, gens):
        rng = random.Random(15)
        for _ in range(5):
            f = random_real_polynomial(rng, max_index=2, n_pairs=3)
            if not f.coeffs:
                continue
            res = annealed_variance(gens, f, Fraction(1, 3))
            assert res.exact
            vp = variance_polynomial(gens, f, res.n_used + 2)
            assert vp.evaluate(Fraction(1, 3)) == res.sigma2
            assert vp.degree <= res.n_used + 2

    def test_degree_zero_cutoff(self, gens):
        vp = variance_polynomial(gens, COBOUNDARY, 0)
        assert vp.coefficients == (Fraction(1),)  # c_0 alone
        assert vp.n_used == 0

    def test_validation(self, gens):
        with pytest.raises(ValueError):
            variance_polynomial(gens, TrigPoly.sine((1, 0)), 2)
        with pytest.raises(ValueError):
            variance_polynomial(gens, COS_X1, -1)


class TestWpHandling:
    def test_dyadic_float_promotes_to_exact(self, gens):
        res = annealed_variance(gens, COS_X1, 0.25)
        assert isinstance(res.sigma2, Fraction)
        assert res.sigma2 == Fraction(1, 2)

    def test_non_dyadic_float_stays_float(self, gens):
        f = random_real_polynomial(random.Random(16), max_index=2, n_pairs=3)
        exact = annealed_variance(gens, f, Fraction(3, 10))
        approx = annealed_variance(gens, f, 0.3)
        assert isinstance(approx.sigma2, float)
        assert approx.sigma2 == pytest.approx(float(exact.sigma2), abs=1e-12)

    def test_out_of_range_rejected(self, gens):
        with pytest.raises(ValueError):
            annealed_variance(gens, COS_X1, -0.1)


class TestSweep:
    def test_anchor_sweep_all_half(self, gens):
        rows = variance_sweep(gens, COS_X1, WPS)
        assert [r.wp for r in rows] == list(WPS)
        for row in rows:
            assert row.error is None
            assert row.result.sigma2 == Fraction(1, 2)
            assert row.result.certified

    def test_errors_recorded_per_row(self, gens):
        bad = TrigPoly.constant(Fraction(1))  # nonzero mean
        rows = variance_sweep(gens, bad, (0.0, 0.5))
        assert all(r.result is None for r in rows)
        assert all("mean" in r.error for r in rows)
