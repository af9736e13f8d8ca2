"""Annealed CLT variance from the correlation series.

The limiting variance of S_N / sqrt(N) under the annealed law is

    sigma2 = c_0 + 2 sum_{n >= 1} c_n,   c_n = m(f L_wp^n f).

For sparse observables the series is often finite: once the coefficient
recursion fully prunes, every later term vanishes identically and the sum
is exact (a Fraction in rational mode).  Otherwise the tail is estimated
by fitting a geometric rate to the last few terms and the result carries
a certified flag.

Each partial sum is a polynomial in the Bernoulli parameter wp (the word
weights are monomials in wp and 1 - wp), which variance_polynomial
computes with exact Fraction coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence, Union

from .lattice import GeneratorPair
from .observable import TrigPoly
from .transfer import (DEFAULT_DEPTH_CAP, CorrelationSeries, CorrelationStream,
                       Probability, _as_real, _norm_prob)

TAIL_SAFETY = 2.0
TAIL_FIT_WINDOW = 5

# float probabilities whose exact binary value has a denominator this small
# are promoted to Fractions so anchor runs stay exact end to end
_RATIONAL_WP_MAX_DEN = 1 << 20


@dataclass(frozen=True)
class VarianceResult:
    """Variance series outcome.

    sigma2 is exact (and a Fraction) when series.exact and
    series.fully_pruned_at is not None; otherwise it is the partial sum
    and tail_bound bounds the omitted remainder.  certified means the
    reported value is within tol of the true series sum.
    """

    sigma2: Union[Fraction, float]
    series: CorrelationSeries
    n_used: int
    certified: bool

    @property
    def tail_bound(self) -> float:
        return self.series.tail_bound

    @property
    def exact(self) -> bool:
        return self.series.exact and self.series.fully_pruned_at is not None


def _promote_wp(wp: Probability, f: TrigPoly) -> Probability:
    wp = _norm_prob(wp)
    if isinstance(wp, float) and f.is_rational:
        as_frac = Fraction(wp)
        if as_frac.denominator <= _RATIONAL_WP_MAX_DEN:
            return as_frac
    return wp


def fit_geometric_tail(terms: Sequence[float]) -> float:
    """Bound |2 sum of terms beyond the last one| by a fitted geometric decay.

    Least-squares fit of log |c_n| over the trailing nonzero window; the
    predicted continuation is doubled (series weight) and doubled again
    (safety).  Returns inf when no decaying fit is available.
    """
    pts = [(i, abs(float(t))) for i, t in enumerate(terms)]
    window = [(i, v) for i, v in pts[-TAIL_FIT_WINDOW:] if v > 0]
    if len(window) < 2:
        return math.inf
    xs = [i for i, _ in window]
    ys = [math.log(v) for _, v in window]
    n = len(xs)
    xbar = sum(xs) / n
    ybar = sum(ys) / n
    denom = sum((x - xbar) ** 2 for x in xs)
    slope = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys)) / denom
    rate = math.exp(slope)
    if rate >= 1.0:
        return math.inf
    last_i, last_v = window[-1]
    lag = len(terms) - 1 - last_i
    base = last_v * rate**lag
    return TAIL_SAFETY * 2.0 * base * rate / (1.0 - rate)


def annealed_variance(gens: GeneratorPair, f: TrigPoly, wp: Probability,
                      tol: float = 1e-10,
                      depth_cap: int = DEFAULT_DEPTH_CAP) -> VarianceResult:
    """Sum the correlation series for the annealed CLT variance.

    Stops when the recursion fully prunes (exact, tail_bound = 0) or when
    the current term plus the fitted geometric tail drops below tol
    (certified).  Hitting depth_cap first leaves the result uncertified
    with the best available tail estimate.

    Args:
        gens: validated generator pair.
        f: real zero-mean observable, d = 1.
        wp: Bernoulli parameter; Fractions (or floats with small exact
            denominator) keep rational observables exact.
        tol: certification target for the omitted tail.
        depth_cap: maximum correlation lag to evaluate.
    """
    if f.dim != 1:
        raise ValueError("annealed variance is defined for d = 1 observables")
    wp = _promote_wp(wp, f)
    stream = CorrelationStream(gens, f, wp)
    rational = f.is_rational and isinstance(wp, Fraction)
    terms = [_as_real(stream.pair(), rational)]
    fully_pruned_at = None
    tail = math.inf
    while True:
        if stream.fully_pruned:
            fully_pruned_at = stream.level
            tail = 0.0
            break
        if stream.level >= depth_cap:
            break
        stream.advance()
        if stream.fully_pruned:
            fully_pruned_at = stream.level
            tail = 0.0
            break
        terms.append(_as_real(stream.pair(), rational))
        tail = fit_geometric_tail(terms)
        if abs(float(terms[-1])) + tail < tol:
            break
    certified = tail <= tol or fully_pruned_at is not None
    series = CorrelationSeries(wp=wp, terms=tuple(terms),
                               exact=fully_pruned_at is not None,
                               tail_bound=0.0 if fully_pruned_at is not None
                               else (tail if math.isfinite(tail) else math.inf),
                               fully_pruned_at=fully_pruned_at)
    sigma2 = terms[0] + 2 * sum(terms[1:]) if len(terms) > 1 else terms[0]
    return VarianceResult(sigma2=sigma2, series=series,
                          n_used=series.n_used, certified=certified)


class FiniteHorizonVariance(NamedTuple):
    value: Union[Fraction, float]
    exact: bool


def finite_horizon_variance(gens: GeneratorPair, f: TrigPoly, n_steps: int,
                            wp: Probability,
                            depth_cap: int = DEFAULT_DEPTH_CAP) -> FiniteHorizonVariance:
    """Exact annealed variance of S_N / sqrt(N) at finite horizon N.

    E[S_N^2] / N = c_0 + 2 sum_{n=1}^{N-1} (1 - n/N) c_n, by stationarity
    of the annealed chain.  Exact when the series prunes before depth_cap;
    the flag is False when terms had to be truncated.
    """
    if n_steps <= 0:
        raise ValueError(f"horizon must be positive, got {n_steps}")
    wp = _promote_wp(wp, f)
    stream = CorrelationStream(gens, f, wp)
    rational = f.is_rational and isinstance(wp, Fraction)
    total = _as_real(stream.pair(), rational)
    exact = True
    for n in range(1, n_steps):
        if stream.fully_pruned:
            break
        if stream.level >= depth_cap:
            exact = False
            break
        stream.advance()
        c = _as_real(stream.pair(), rational)
        weight = Fraction(n_steps - n, n_steps) if rational \
            else (n_steps - n) / n_steps
        total = total + 2 * weight * c
    return FiniteHorizonVariance(total, exact)


# -- polynomial-in-wp mode ------------------------------------------------


class _FractionPoly:
    """Dense polynomial with Fraction coefficients (weights in wp)."""

    __slots__ = ("c",)

    def __init__(self, coeffs: Sequence[Fraction]):
        c = list(coeffs)
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        self.c = tuple(c)

    def __add__(self, other: _FractionPoly) -> _FractionPoly:
        a, b = self.c, other.c
        if len(a) < len(b):
            a, b = b, a
        merged = list(a)
        for i, v in enumerate(b):
            merged[i] += v
        return _FractionPoly(merged)

    def __mul__(self, scalar: Fraction) -> _FractionPoly:
        return _FractionPoly([v * scalar for v in self.c])

    def times_p(self) -> _FractionPoly:
        return _FractionPoly((Fraction(0),) + self.c)

    def times_one_minus_p(self) -> _FractionPoly:
        return self + self.times_p() * Fraction(-1)

    def evaluate(self, wp: Probability):
        acc = self.c[-1]
        for v in reversed(self.c[:-1]):
            acc = acc * wp + v
        return acc


@dataclass(frozen=True)
class VariancePolynomial:
    """Degree-n partial variance sum as an exact polynomial in wp."""

    coefficients: tuple[Fraction, ...]
    n_used: int

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, wp: Probability) -> Union[Fraction, float]:
        acc: Union[Fraction, float] = self.coefficients[-1]
        for v in reversed(self.coefficients[:-1]):
            acc = acc * wp + v
        return acc


def variance_polynomial(gens: GeneratorPair, f: TrigPoly,
                        n: int) -> VariancePolynomial:
    """Partial sum c_0 + 2 sum_{m<=n} c_m as a polynomial in wp.

    Word weights are products of wp and (1 - wp) factors, so each c_m is a
    polynomial of degree <= m with Fraction coefficients; the computation
    is exact and never truncates (n itself bounds the depth).

    Args:
        gens: validated generator pair.
        f: rational-mode real zero-mean observable.
        n: series cutoff, >= 0.
    """
    if not f.is_rational:
        raise ValueError("variance_polynomial requires rational coefficients")
    if n < 0:
        raise ValueError(f"cutoff must be nonnegative, got {n}")
    factors = (lambda w: w.times_p(), lambda w: w.times_one_minus_p())
    stream = CorrelationStream(gens, f, Fraction(1, 2), scale=factors)
    # re-seed the weights as degree-0 polynomials
    stream._weights = {k: _FractionPoly([w])
                       for k, w in stream._weights.items()}
    zero = _FractionPoly([Fraction(0)])
    total = stream.pair()
    total = zero + total if isinstance(total, _FractionPoly) else zero
    n_used = 0
    for m in range(1, n + 1):
        if stream.fully_pruned:
            break
        stream.advance()
        c = stream.pair()
        if isinstance(c, _FractionPoly):
            total = total + c * Fraction(2)
        n_used = m
    if len(total.c) > n + 1:
        raise AssertionError(f"degree {len(total.c) - 1} exceeds cutoff {n}")
    return VariancePolynomial(coefficients=total.c, n_used=n_used)


@dataclass(frozen=True)
class SweepRow:
    wp: Probability
    result: VarianceResult | None
    error: str | None


def variance_sweep(gens: GeneratorPair, f: TrigPoly,
                   wp_grid: Sequence[Probability], tol: float = 1e-10,
                   depth_cap: int = DEFAULT_DEPTH_CAP) -> list[SweepRow]:
    """annealed_variance over a wp grid; failures recorded per row."""
    rows = []
    for wp in wp_grid:
        try:
            rows.append(SweepRow(wp, annealed_variance(
                gens, f, wp, tol=tol, depth_cap=depth_cap), None))
        except (ValueError, ArithmeticError) as exc:
            rows.append(SweepRow(wp, None, f"{type(exc).__name__}: {exc}"))
    return rows
