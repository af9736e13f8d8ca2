"""End-to-end acceptance checks, one test per guarantee.

Exact claims (variance anchors, operator identities, periodic-point
counts, cone constants) are asserted with no tolerance.  Statistical
claims run frozen-seed Monte Carlo experiments sized in calibration so
that a true regression is distinguishable from sampling noise; every
seed below is pinned and the suite is reproducible bit for bit.  Each
test also enforces its wall-clock budget.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from itertools import product
from time import perf_counter

import numpy as np
import pytest

from toralstats import (CoboundaryVerdict, ProductClass, TrigPoly,
                        annealed_samples, annealed_variance, apply_averaged,
                        apply_markov, apply_transfer, classify_conjugate_product,
                        coboundary_obstruction, compose_word, correlation,
                        default_pair, doubled_correlation,
                        empirical_variance_quenched, fixed_points,
                        hyperbolicity_constants, inner_product,
                        ks_distance_to_normal, large_deviation_tail,
                        mann_kendall_z, paired_second_moment,
                        quenched_char_fn_ladder, random_real_polynomial,
                        sample_environment)
from toralstats.montecarlo import char_fn_from_samples
from toralstats.rng import CounterStream

GENS = default_pair()
ANCHOR = TrigPoly.cosine((1, 0))
COBOUNDARY = TrigPoly.cosine((1, 0)) - TrigPoly.cosine((1, 1))
WP_GRID = (0, 0.25, 0.5, 0.75, 1)

# Observable whose per-word variance genuinely depends on the word: the
# lag-1 correlation is -2 after a step of T_1 and 0 after a step of T_0
# (the mode (0,1) is pulled onto (1,2) only by A_1^T), so the empirical
# variance of S_N/sqrt(N) for a word with k ones is 4 - 4k/N and the
# across-word spread of the characteristic function decays like 1/N.
WORD_SENSITIVE = TrigPoly.cosine((0, 1), 2) - TrigPoly.cosine((1, 2), 2)


def test_variance_anchor_is_exactly_one_half_at_every_wp():
    t0 = perf_counter()
    for wp in WP_GRID:
        result = annealed_variance(GENS, ANCHOR, wp)
        assert result.sigma2 == Fraction(1, 2)
        assert isinstance(result.sigma2, Fraction)
        assert result.certified and result.exact
        assert result.n_used <= 1
    assert perf_counter() - t0 < 1.0


def test_coboundary_anchor_vanishes_and_orbit_scan_stays_silent():
    t0 = perf_counter()
    for wp in WP_GRID:
        result = annealed_variance(GENS, COBOUNDARY, wp)
        assert result.sigma2 == 0
        assert result.certified and result.exact
        c0 = correlation(GENS, COBOUNDARY, 0, wp)
        c1 = correlation(GENS, COBOUNDARY, 1, wp)
        assert c0.exact and c0.value == 1
        assert c1.exact and c1.value == Fraction(-1, 2)
        for n in (2, 3, 4, 5):
            cn = correlation(GENS, COBOUNDARY, n, wp)
            assert cn.exact and cn.value == 0
    report = coboundary_obstruction(GENS, COBOUNDARY, k_max=8)
    assert report.verdict is CoboundaryVerdict.INCONCLUSIVE
    assert report.witness is None
    assert report.words_scanned == sum(2**k for k in range(1, 9))
    assert perf_counter() - t0 < 10.0


def test_operator_identities_hold_exactly_on_random_observables():
    t0 = perf_counter()
    rng = random.Random(2026)
    for _ in range(100):
        f = random_real_polynomial(rng)
        g = random_real_polynomial(rng, zero_mean=False)
        wp = Fraction(rng.randint(0, 8), 8)
        assert inner_product(apply_averaged(GENS, wp, f), g) == \
            inner_product(f, apply_markov(GENS, wp, g))
        assert apply_averaged(GENS, wp, g).mean == g.mean
        assert apply_markov(GENS, wp, g).mean == g.mean
        for m in (GENS.m0, GENS.m1):
            lg = apply_transfer(m, g)
            assert sorted(g.coeffs.values(), key=str) == \
                sorted(lg.coeffs.values(), key=str)
        n = rng.randint(0, 3)
        single = correlation(GENS, f, n, wp)
        doubled = doubled_correlation(GENS, f, n, wp)
        assert doubled.exact == single.exact
        assert doubled.value == 2 * single.value
    assert perf_counter() - t0 < 10.0


def test_annealed_char_fn_error_decays_at_root_n_rate():
    # Pass condition is twofold: the error at each horizon obeys the
    # explicit envelope (1 + lam^3)/sqrt(N), and the error sequence has
    # no increasing Mann-Kendall trend at 95%.  The trend statistic is
    # computed on the error in units of its own standard error: the raw
    # sqrt(N)-scaled error would hide a growing sampling envelope
    # sqrt(N/M) inside it, which flags spurious trends at fixed M.
    t0 = perf_counter()
    lams = (0.5, 1.0, 2.0)
    ns = [2**k for k in range(8, 15)]
    base = CounterStream(401)
    studentized = {lam: [] for lam in lams}
    for i, n in enumerate(ns):
        samples = annealed_samples(GENS, ANCHOR, 0.5, n, 20000, base.u64(i))
        for lam in lams:
            est = char_fn_from_samples(samples, lam)
            err = abs(est.value - math.exp(-lam * lam / 4.0))
            assert math.sqrt(n) * err <= 1.0 + lam**3
            studentized[lam].append(
                err / math.hypot(est.stderr_re, est.stderr_im))
    for lam in lams:
        assert mann_kendall_z(studentized[lam]) <= 1.6448536269514722
    assert perf_counter() - t0 < 300.0


def test_every_frozen_word_reproduces_the_annealed_variance():
    t0 = perf_counter()
    base = CounterStream(501)
    for j in range(20):
        env = sample_environment(0.5, 4096, base.u64(2 * j))
        stats = empirical_variance_quenched(GENS, ANCHOR, env, 4096, 20000,
                                            base.u64(2 * j + 1))
        assert abs(stats.variance - 0.5) <= 5 * stats.variance_stderr
    assert perf_counter() - t0 < 300.0


def test_across_word_char_fn_variance_decays_with_horizon():
    # Debiased across-word variance of Re E_x e^{i S_N / sqrt(N)} for the
    # word-sensitive observable; the per-word sampling contribution
    # mean(stderr^2) is subtracted so the statistic estimates the true
    # across-word spread, which halves per doubling of N.
    t0 = perf_counter()
    ns = [2**k for k in range(8, 14)]
    n_words, n_starts = 24, 20000
    base = CounterStream(601)
    re_values = np.zeros((n_words, len(ns)))
    se2 = np.zeros((n_words, len(ns)))
    for w in range(n_words):
        env = sample_environment(0.5, ns[-1], base.u64(2 * w))
        ladder = quenched_char_fn_ladder(GENS, WORD_SENSITIVE, env, 1.0, ns,
                                         n_starts, base.u64(2 * w + 1))
        for j, n in enumerate(ns):
            re_values[w, j] = ladder[n].value.real
            se2[w, j] = ladder[n].stderr_re ** 2
    spread = np.var(re_values, axis=0, ddof=1) - se2.mean(axis=0)
    decreases = sum(spread[j + 1] < spread[j] for j in range(len(ns) - 1))
    assert decreases >= 4
    assert perf_counter() - t0 < 300.0


def test_annealed_distribution_is_normal_by_ks():
    t0 = perf_counter()
    samples = annealed_samples(GENS, ANCHOR, 0.5, 4096, 10000, 7)
    assert ks_distance_to_normal(samples, 0.5) < 0.05
    assert perf_counter() - t0 < 120.0


def test_large_deviation_uppers_decay_log_linearly():
    t0 = perf_counter()
    ns = (256, 512, 1024, 2048)
    base = CounterStream(801)
    uppers = []
    for i, n in enumerate(ns):
        tail = large_deviation_tail(GENS, ANCHOR, 0.5, n, 0.2, 10**6,
                                    base.u64(i))
        uppers.append(tail.wilson_high)
    slope = np.polyfit(np.array(ns, dtype=float), np.log(uppers), 1)[0]
    assert slope < 0.0
    assert perf_counter() - t0 < 300.0


def test_paired_second_moment_matches_the_doubled_system_limit():
    t0 = perf_counter()
    estimate = paired_second_moment(GENS, ANCHOR, 0.5, 1.0, 4096, 100, 200,
                                    seed=11)
    assert abs(estimate.value - math.exp(-0.5)) <= 5 * estimate.stderr
    assert perf_counter() - t0 < 300.0


def test_periodic_point_counts_match_determinant_and_grid_oracle():
    t0 = perf_counter()
    words = [w for k in range(1, 7) for w in product((0, 1), repeat=k)]
    assert len(words) == 126
    for word in words:
        m = compose_word(GENS, word)
        (a, b), (c, d) = m.rows
        expected = abs((a - 1) * (d - 1) - b * c)
        orbit = fixed_points(GENS, word)
        assert len(orbit.points) == expected
        q = expected
        i = np.arange(q)
        r1 = ((a - 1) * i[:, None] + b * i[None, :]) % q
        r2 = (c * i[:, None] + (d - 1) * i[None, :]) % q
        oracle = set(zip(*np.nonzero((r1 == 0) & (r2 == 0))))
        got = {(int(p1 * q) % q, int(p2 * q) % q) for p1, p2 in orbit.points}
        assert got == oracle
    assert set(fixed_points(GENS, (0,)).points) == \
        {(Fraction(0), Fraction(0)), (Fraction(1, 2), Fraction(0))}
    assert perf_counter() - t0 < 30.0


def test_cone_constants_bound_every_sampled_vector():
    t0 = perf_counter()
    cone = hyperbolicity_constants(GENS)
    assert cone.lam_min == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert cone.lam_max == pytest.approx(3.864328450540825, rel=1e-12)
    assert cone.c0 == 1.0
    assert cone.beta == 2.0

    rng = np.random.default_rng(11)
    theta = rng.uniform(0.0, math.pi / 2.0, 10**4)
    v = np.stack([np.cos(theta), np.sin(theta)])
    for mt in GENS.transposes():
        (a, b), (c, d) = mt.rows
        norms = np.hypot(a * v[0] + b * v[1], c * v[0] + d * v[1])
        assert np.all(norms >= cone.lam_min - 1e-12)
        assert np.all(norms <= cone.lam_max + 1e-12)

    phi = rng.uniform(-math.pi / 2.0, 0.0, 10**4)
    scale = rng.uniform(0.5, 2.0, 10**4)
    u = np.stack([scale * np.cos(phi), scale * np.sin(phi)])
    for inv in GENS.adjugates():
        (a, b), (c, d) = inv.rows
        w1 = a * u[0] + b * u[1]
        w2 = c * u[0] + d * u[1]
        mid = -w1 * w2
        outer = cone.beta * w1 * w1
        assert np.all(mid >= w1 * w1 / cone.beta - 1e-12 * outer)
        assert np.all(mid <= outer * (1.0 + 1e-12))

    assert classify_conjugate_product(GENS) is ProductClass.PARABOLIC
    assert perf_counter() - t0 < 5.0
