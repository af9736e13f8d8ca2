"""Transfer operators, exact correlations, and the contraction report."""

import itertools
import random
from fractions import Fraction

import numpy as np
import pytest

from toralstats import (GeneratorPair, IntMatrix, TorusPoint, TrigPoly,
                        apply_averaged, apply_map, apply_markov,
                        apply_transfer, compose_observable, correlation,
                        default_pair, doubled_correlation, evaluate,
                        inner_product, lasota_yorke_report, multiply, pq_norm,
                        random_real_polynomial)
from toralstats.transfer import CorrelationStream

COS_X1 = TrigPoly.cosine((1, 0))
WPS = (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4),
       Fraction(1))


@pytest.fixture(scope="module")
def gens() -> GeneratorPair:
    return default_pair()


def brute_correlation(gens, f, n, wp):
    """Independent oracle: enumerate all 2^n words.

    c_n = m(f L^n f) = sum_w P(w) m((f o M_w) f) with M_w the product of
    the word's generators; this walks the Markov route with no pruning
    and no operator averaging.
    """
    total = Fraction(0) if f.is_rational else 0.0
    for word in itertools.product((0, 1), repeat=n):
        m = IntMatrix.identity()
        for s in word:
            m = m @ gens[s]
        zeros = sum(1 for s in word if s == 0)
        prob = wp ** zeros * (1 - wp) ** (n - zeros)
        if prob == 0:
            continue
        total += prob * inner_product(compose_observable(m, f), f)
    return total


class TestOperatorAction:
    def test_transfer_moves_support_by_inverse_transpose(self, gens):
        g0 = apply_transfer(gens.m0, COS_X1)
        assert g0.support == frozenset({(3, -1), (-3, 1)})
        g1 = apply_transfer(gens.m1, COS_X1)
        assert g1.support == frozenset({(2, -1), (-2, 1)})

    def test_transfer_is_composition_with_inverse(self, gens):
        rng = random.Random(2)
        f = random_real_polynomial(rng, zero_mean=False)
        for m in (gens.m0, gens.m1):
            lf = apply_transfer(m, f)
            for _ in range(20):
                x = TorusPoint((rng.getrandbits(64), rng.getrandbits(64)))
                assert evaluate(lf, x) == pytest.approx(
                    evaluate(f, apply_map(m.adjugate(), x)), abs=1e-9)

    def test_composition_operator_pointwise(self, gens):
        rng = random.Random(3)
        g = random_real_polynomial(rng, zero_mean=False)
        for m in (gens.m0, gens.m1):
            qg = compose_observable(m, g)
            for _ in range(20):
                x = TorusPoint((rng.getrandbits(64), rng.getrandbits(64)))
                assert evaluate(qg, x) == pytest.approx(
                    evaluate(g, apply_map(m, x)), abs=1e-9)

    def test_transfer_preserves_coefficient_multiset(self, gens):
        f = random_real_polynomial(random.Random(4), zero_mean=False)
        for m in (gens.m0, gens.m1):
            lf = apply_transfer(m, f)
            assert sorted(f.coeffs.values(), key=str) == \
                sorted(lf.coeffs.values(), key=str)

    def test_transfer_requires_det_one(self):
        double = IntMatrix.from_rows([[2, 0], [0, 1]])
        with pytest.raises(ValueError):
            apply_transfer(double, COS_X1)
        with pytest.raises(ValueError):
            compose_observable(double, COS_X1)

    def test_averaged_preserves_mean(self, gens):
        f = random_real_polynomial(random.Random(5), zero_mean=False) \
            + TrigPoly.constant(Fraction(2, 3))
        for wp in WPS:
            assert apply_averaged(gens, wp, f).mean == f.mean
            assert apply_markov(gens, wp, f).mean == f.mean

    def test_transfer_fixes_constants(self, gens):
        one = TrigPoly.constant(Fraction(1))
        assert apply_averaged(gens, Fraction(1, 3), one) == one

    def test_duality_pairing(self, gens):
        rng = random.Random(6)
        for _ in range(30):
            f = random_real_polynomial(rng)
            g = random_real_polynomial(rng, zero_mean=False)
            wp = Fraction(rng.randint(0, 8), 8)
            lhs = inner_product(apply_averaged(gens, wp, f), g)
            rhs = inner_product(f, apply_markov(gens, wp, g))
            assert lhs == rhs

    def test_wp_validation(self, gens):
        with pytest.raises(ValueError):
            apply_averaged(gens, 1.5, COS_X1)
        with pytest.raises(ValueError):
            apply_markov(gens, Fraction(-1, 2), COS_X1)


class TestCorrelation:
    def test_cosine_anchor_series(self, gens):
        # support escapes in one step, so c_0 = 1/2 and c_n = 0 after
        for wp in WPS:
            c0 = correlation(gens, COS_X1, 0, wp)
            assert c0.value == Fraction(1, 2) and c0.exact
            for n in (1, 2, 3, 7):
                cn = correlation(gens, COS_X1, n, wp)
                assert cn.value == 0 and cn.exact

    def test_coboundary_anchor_series(self, gens):
        # f = cos(2 pi x1) - cos(2 pi (x1+x2)): both generators share the
        # first row, so L_i maps the (1,1)-pair onto the (1,0)-pair and
        # c_1 = -1/2 regardless of wp; all later terms vanish.
        f = COS_X1 - TrigPoly.cosine((1, 1))
        for wp in WPS:
            assert correlation(gens, f, 0, wp).value == Fraction(1)
            assert correlation(gens, f, 1, wp).value == Fraction(-1, 2)
            for n in (2, 3, 4, 8):
                cn = correlation(gens, f, n, wp)
                assert cn.value == 0 and cn.exact

    def test_matches_word_enumeration(self, gens):
        rng = random.Random(7)
        for trial in range(8):
            f = random_real_polynomial(rng, max_index=2, n_pairs=3)
            if not f.coeffs:
                continue
            wp = WPS[trial % len(WPS)]
            for n in range(0, 6):
                got = correlation(gens, f, n, wp)
                want = brute_correlation(gens, f, n, wp)
                assert got.exact
                assert got.value == want, (trial, n, wp)

    def test_averaged_operator_route_agrees(self, gens):
        f = random_real_polynomial(random.Random(8), max_index=2, n_pairs=3)
        wp = Fraction(1, 3)
        g = f
        for n in range(5):
            direct = inner_product(f, g)
            assert correlation(gens, f, n, wp).value == direct
            g = apply_averaged(gens, wp, g)

    def test_float_wp_stays_close_to_exact(self, gens):
        f = random_real_polynomial(random.Random(9), max_index=2, n_pairs=3)
        for n in range(4):
            exact = correlation(gens, f, n, Fraction(3, 10)).value
            approx = correlation(gens, f, n, 0.3).value
            assert float(exact) == pytest.approx(float(approx), abs=1e-12)

    def test_requires_zero_mean_and_real(self, gens):
        with pytest.raises(ValueError):
            correlation(gens, TrigPoly.constant(Fraction(1)), 1, 0.5)
        with pytest.raises(ValueError):
            correlation(gens, TrigPoly({(1, 0): 1.0 + 0j}), 1, 0.5)
        with pytest.raises(ValueError):
            correlation(gens, COS_X1, -1, 0.5)

    def test_depth_cap_truncation_is_flagged(self, gens):
        # support along the stable direction (Fibonacci slope) contracts
        # for many steps before escaping, so a tiny cap truncates
        f = TrigPoly.cosine((55, -34))
        res = correlation(gens, f, 20, Fraction(1, 2), depth_cap=5)
        assert res.exact is False
        # with the full default cap the same correlation resolves exactly
        full = correlation(gens, f, 20, Fraction(1, 2))
        assert full.exact

    def test_stream_prunes_cosine_in_one_step(self, gens):
        stream = CorrelationStream(gens, COS_X1, Fraction(1, 2))
        assert stream.pair() == Fraction(1, 2)
        stream.advance()
        assert stream.fully_pruned


class TestDoubledCorrelation:
    @pytest.mark.parametrize("wp", [Fraction(0), Fraction(1, 2),
                                    Fraction(7, 8)])
    def test_equals_twice_single(self, gens, wp):
        rng = random.Random(10)
        f = random_real_polynomial(rng, max_index=2, n_pairs=3)
        for n in range(6):
            single = correlation(gens, f, n, wp)
            double = doubled_correlation(gens, f, n, wp)
            assert double.value == 2 * single.value

    def test_rejects_doubled_input(self, gens):
        f2 = TrigPoly.cosine((1, 0, 0, 0))
        with pytest.raises(ValueError):
            doubled_correlation(gens, f2, 1, 0.5)


class TestLasotaYorkeReport:
    def test_cosine_report_contracts(self, gens):
        report = lasota_yorke_report(gens, [COS_X1], p=1.0, q=3.0, n_max=3,
                                     wp=0.5)
        assert report.gap_ok
        assert report.sup_ratio < 1.5
        rows = {r.n: r for r in report.rows}
        assert rows[0].ratio == 1.0
        # iterates escape to high frequencies, so the strong norm dives
        assert rows[2].ratio < 0.1
        assert rows[3].ratio < rows[2].ratio

    def test_constant_row_is_flat(self, gens):
        one = TrigPoly.constant(Fraction(1))
        report = lasota_yorke_report(gens, [one], p=1.0, q=3.0, n_max=2,
                                     wp=0.5, labels=["one"])
        for row in report.rows:
            assert row.label == "one"
            assert row.strong_n == pytest.approx(1.0, rel=1e-6)
            assert row.ratio == pytest.approx(1.0, rel=1e-6)

    def test_first_iterate_matches_direct_norm(self, gens):
        f = COS_X1 + TrigPoly.cosine((1, 1), Fraction(-1, 2))
        report = lasota_yorke_report(gens, [f], p=1.0, q=3.0, n_max=1,
                                     wp=Fraction(1, 2))
        lf = apply_averaged(gens, Fraction(1, 2), f)
        direct = pq_norm(lf, 1.0, 3.0, tol=1e-5).value
        row = {r.n: r for r in report.rows}[1]
        assert row.strong_n == pytest.approx(direct, rel=1e-4)

    def test_gap_warning_when_exponents_do_not_contract(self, gens):
        # q = 1 at p = 1 violates Lambda**p < lambda**(p+q)
        report = lasota_yorke_report(gens, [COS_X1], p=1.0, q=1.0, n_max=1,
                                     wp=0.5)
        assert not report.gap_ok
        assert report.warnings
