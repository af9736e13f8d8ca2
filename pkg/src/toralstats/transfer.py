"""Transfer operators of toral automorphisms on sparse Fourier data.

For T(x) = A x mod 1 the transfer operator (composition with T^{-1})
permutes Fourier coefficients: (L_T f)_k = f_{A^T k}.  The annealed
operator averages the two generators, L_wp = wp L_{T_0} + (1-wp) L_{T_1},
and is dual to the Markov operator Q_wp g = wp g o T_0 + (1-wp) g o T_1
in the pairing m(f g) = sum f_k g_{-k}.

Correlations c_n = m(f L_wp^n f) are computed by pushing the pairing
weights through the coefficient recursion level by level, memoized on
(level, lattice vector).  The single unconditional prune: once a vector
is componentwise sign-definite with l1 norm beyond the support radius,
every further image stays so (the generators have all entries >= 1), so
the branch can never pair with f again and is dropped.  A depth cap
bounds mixed-sign wandering; results truncated by the cap are flagged
inexact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence, Union

from .lattice import GeneratorPair, IntMatrix
from .observable import TrigPoly, _pq_objective_terms, inner_product, pq_norm

Probability = Union[Fraction, float]

DEFAULT_DEPTH_CAP = 64


def _norm_prob(wp: Probability) -> Probability:
    if isinstance(wp, int):
        wp = Fraction(wp)
    if not 0 <= wp <= 1:
        raise ValueError(f"wp must lie in [0, 1], got {wp}")
    return wp


def _pushforward(mat: IntMatrix, f: TrigPoly) -> TrigPoly:
    # out[mat @ j] = f_j, applied blockwise in the doubled case
    out = {}
    for j, c in f.coeffs.items():
        key = _apply_blockwise(mat, j)
        out[key] = c
    return TrigPoly(out, dim=f.dim)


def _apply_blockwise(mat: IntMatrix, k: tuple[int, ...]) -> tuple[int, ...]:
    if len(k) == 2:
        return mat.mul_vec((k[0], k[1]))
    a = mat.mul_vec((k[0], k[1]))
    b = mat.mul_vec((k[2], k[3]))
    return (a[0], a[1], b[0], b[1])


def apply_transfer(m: IntMatrix, f: TrigPoly) -> TrigPoly:
    """Transfer operator of x -> m x mod 1: (L f)_k = f_{m^T k}.

    Requires det m = 1 so that the index map k -> (m^T)^{-1} k is a lattice
    bijection; the support moves by the inverse transpose.
    """
    if m.det() != 1:
        raise ValueError(f"transfer needs det 1, got det {m.det()}")
    return _pushforward(m.adjugate().transpose(), f)


def compose_observable(m: IntMatrix, g: TrigPoly) -> TrigPoly:
    """Composition operator g -> g o T for T(x) = m x mod 1."""
    if m.det() != 1:
        raise ValueError(f"composition needs det 1, got det {m.det()}")
    return _pushforward(m.transpose(), g)


def apply_averaged(gens: GeneratorPair, wp: Probability, f: TrigPoly) -> TrigPoly:
    """Annealed transfer operator L_wp f = wp L_{T_0} f + (1 - wp) L_{T_1} f."""
    wp = _norm_prob(wp)
    return wp * apply_transfer(gens.m0, f) + (1 - wp) * apply_transfer(gens.m1, f)


def apply_markov(gens: GeneratorPair, wp: Probability, g: TrigPoly) -> TrigPoly:
    """Markov (averaged composition) operator Q_wp g, the dual of L_wp."""
    wp = _norm_prob(wp)
    return wp * compose_observable(gens.m0, g) \
        + (1 - wp) * compose_observable(gens.m1, g)


# -- correlation engine ------------------------------------------------


def _escaped(k: tuple[int, ...], radius: int) -> bool:
    # sign-definite blocks with l1 norm beyond the support radius never
    # return: entries >= 1 keep each block sign-definite and the l1 norm
    # nondecreasing under both transposes
    total = 0
    for i in range(0, len(k), 2):
        a, b = k[i], k[i + 1]
        if (a > 0 and b < 0) or (a < 0 and b > 0):
            return False
        total += abs(a) + abs(b)
    return total > radius


class CorrelationValue(NamedTuple):
    value: Union[Fraction, float]
    exact: bool


@dataclass(frozen=True)
class CorrelationSeries:
    """Correlation terms c_0 .. c_{n_used} with a certified tail bound.

    exact is True when no term was truncated by the depth cap; tail_bound
    is an upper bound for |2 sum_{n > n_used} c_n| (zero when the
    recursion fully pruned, i.e. all later terms vanish identically).
    """

    wp: Probability
    terms: tuple[Union[Fraction, float], ...]
    exact: bool
    tail_bound: float
    fully_pruned_at: int | None

    @property
    def n_used(self) -> int:
        return len(self.terms) - 1


class CorrelationStream:
    """Level-synchronous evaluation of c_n = m(f L_wp^n f).

    Maintains the weight measure mu_n on lattice vectors with
    mu_0(k) = f_{-k} and mu_{n+1}(A_i^T k) += p_i mu_n(k); then
    c_n = sum_k mu_n(k) f_k.  This is the adjoint traversal of the
    memoized (level, vector) recursion and computes identical values
    with one dictionary per level.
    """

    def __init__(self, gens: GeneratorPair, f: TrigPoly, wp: Probability,
                 scale: tuple[Callable, Callable] | None = None):
        if not f.is_real:
            raise ValueError("correlations are defined for real observables")
        if f.mean != 0:
            raise ValueError(f"observable must have zero mean, got {f.mean}")
        wp = _norm_prob(wp)
        self._mats = gens.transposes()
        self._radius = f.support_radius_l1()
        self._f = f
        self.wp = wp
        if scale is None:
            p0, p1 = wp, 1 - wp
            self._factors = (lambda w: p0 * w, lambda w: p1 * w)
        else:
            self._factors = scale
        self._weights: dict[tuple[int, ...], object] = {
            tuple(-e for e in k): c for k, c in f.coeffs.items()
        }
        self.level = 0

    @property
    def fully_pruned(self) -> bool:
        return not self._weights

    def pair(self):
        """Current-level correlation value sum_k mu_n(k) f_k."""
        total = None
        for k, c in self._f.coeffs.items():
            w = self._weights.get(k)
            if w is not None:
                term = w * c
                total = term if total is None else total + term
        if total is None:
            return Fraction(0) if self._f.is_rational else 0.0
        return total

    def advance(self) -> None:
        nxt: dict[tuple[int, ...], object] = {}
        f0, f1 = self._factors
        m0, m1 = self._mats
        radius = self._radius
        for k, w in self._weights.items():
            for mat, scaled in ((m0, f0(w)), (m1, f1(w))):
                kk = _apply_blockwise(mat, k)
                if _escaped(kk, radius):
                    continue
                prev = nxt.get(kk)
                nxt[kk] = scaled if prev is None else prev + scaled
        self._weights = nxt
        self.level += 1


def _as_real(value, rational: bool):
    if rational:
        return value
    c = complex(value)
    if abs(c.imag) > 1e-9 * (1.0 + abs(c.real)):
        raise ArithmeticError(f"correlation came out non-real: {c}")
    return c.real


def correlation(gens: GeneratorPair, f: TrigPoly, n: int, wp: Probability,
                depth_cap: int = DEFAULT_DEPTH_CAP) -> CorrelationValue:
    """n-step annealed correlation c_n = m(f L_wp^n f).

    Exact (as a Fraction) when f is rational and wp is a Fraction or int.
    The flag is False only when the depth cap truncated the recursion
    before it fully pruned, in which case the reported value omits the
    truncated branches.

    Args:
        gens: validated generator pair.
        f: real zero-mean observable.
        n: correlation lag, >= 0.
        wp: probability of drawing generator 0.
        depth_cap: recursion depth budget.
    """
    if n < 0:
        raise ValueError(f"lag must be nonnegative, got {n}")
    stream = CorrelationStream(gens, f, wp)
    rational = f.is_rational and isinstance(stream.wp, Fraction)
    for _ in range(min(n, depth_cap)):
        if stream.fully_pruned:
            return CorrelationValue(Fraction(0) if rational else 0.0, True)
        stream.advance()
    if stream.level < n:
        # depth cap hit while branches were still alive
        exact = stream.fully_pruned
        return CorrelationValue(Fraction(0) if rational else 0.0, exact)
    return CorrelationValue(_as_real(stream.pair(), rational), True)


def doubled_correlation(gens: GeneratorPair, f: TrigPoly, n: int,
                        wp: Probability,
                        depth_cap: int = DEFAULT_DEPTH_CAP) -> CorrelationValue:
    """Correlation of the doubled observable f(x) - f(y) on the 4-torus.

    The doubled system applies the same generator to both factors, so
    m_2(f_2 [L^(2)]^n f_2) = 2 m(f L^n f); this is computed directly on
    the Z^4 lattice and, for n <= 3, cross-checked against that identity.
    """
    if f.dim != 1:
        raise ValueError("doubled correlation starts from a d = 1 observable")
    doubled = {}
    for k, c in f.coeffs.items():
        doubled[(k[0], k[1], 0, 0)] = c
        prev = doubled.get((0, 0, k[0], k[1]))
        doubled[(0, 0, k[0], k[1])] = -c if prev is None else prev - c
    f2 = TrigPoly(doubled, dim=2)
    stream = CorrelationStream(gens, f2, wp)
    rational = f2.is_rational and isinstance(stream.wp, Fraction)
    for _ in range(min(n, depth_cap)):
        if stream.fully_pruned:
            break
        stream.advance()
    if stream.level < n and not stream.fully_pruned:
        return CorrelationValue(Fraction(0) if rational else 0.0, False)
    value = _as_real(stream.pair(), rational) if stream.level == n \
        else (Fraction(0) if rational else 0.0)
    if n <= 3:
        single = correlation(gens, f, n, wp, depth_cap)
        if not math.isclose(float(value), 2.0 * float(single.value),
                            rel_tol=1e-12, abs_tol=1e-12):
            raise AssertionError(
                f"doubled correlation {value} != 2 * {single.value} at n={n}")
    return CorrelationValue(value, True)


# -- Lasota-Yorke empirical report ---------------------------------------


@dataclass(frozen=True)
class LasotaYorkeRow:
    label: str
    n: int
    strong_n: float
    strong_0: float
    weak_0: float
    ratio: float


@dataclass(frozen=True)
class LasotaYorkeReport:
    """Empirical operator-norm witnesses for the averaged transfer operator.

    Each row records ||L_wp^n f||_{p,q} against ||f||_{p,q} and the weak
    norm ||f||_{p-1,q+1}; sup_ratio is an empirical stand-in for the
    uniform constant (no effective theoretical constant is claimed).
    """

    wp: Probability
    p: float
    q: float
    rows: tuple[LasotaYorkeRow, ...]
    sup_ratio: float
    gap_ok: bool
    warnings: tuple[str, ...]


def _scaled_pq_norm(f: TrigPoly, p: float, q: float, rel_tol: float) -> float:
    # Iterating L_wp inflates support indices like Lambda^n, which inflates
    # the pq_norm grid certificate in turn; ask for accuracy relative to a
    # cheap upper bound (denominators >= 1) so the grid stays affordable.
    upper = abs(complex(f.mean)) + sum(w for w, _, _ in
                                       _pq_objective_terms(f, p))
    return pq_norm(f, p, q, rel_tol * max(1.0, upper)).value


def lasota_yorke_report(gens: GeneratorPair, fs: Sequence[TrigPoly],
                        p: float, q: float, n_max: int,
                        wp: Probability, rel_tol: float = 1e-5,
                        labels: Sequence[str] | None = None) -> LasotaYorkeReport:
    """Tabulate ||L_wp^n f||_{p,q} growth for each observable.

    The cone-expansion gap condition lam_max**p < lam_min**(p+q) is
    checked and reported as a warning when violated (the inequality is
    what makes the strong norm contract in theory).  Norms are computed
    to relative accuracy rel_tol; pq_norm raises when even that is out of
    reach, and the error propagates.
    """
    from .lattice import hyperbolicity_constants

    wp = _norm_prob(wp)
    cones = hyperbolicity_constants(gens)
    gap_ok = cones.lam_max**p < cones.lam_min**(p + q)
    warnings = []
    if not gap_ok:
        warnings.append(
            f"gap condition fails: {cones.lam_max}**{p} >= "
            f"{cones.lam_min}**({p}+{q}); raise q")
    if labels is None:
        labels = [f"f{i}" for i in range(len(fs))]
    rows = []
    sup_ratio = 0.0
    for label, f in zip(labels, fs):
        strong_0 = _scaled_pq_norm(f, p, q, rel_tol)
        weak_0 = _scaled_pq_norm(f, p - 1, q + 1, rel_tol)
        iterate = f
        for n in range(n_max + 1):
            strong_n = _scaled_pq_norm(iterate, p, q, rel_tol) if n \
                else strong_0
            ratio = strong_n / strong_0 if strong_0 > 0 else math.inf
            rows.append(LasotaYorkeRow(label, n, strong_n, strong_0,
                                       weak_0, ratio))
            sup_ratio = max(sup_ratio, ratio)
            if n < n_max:
                iterate = apply_averaged(gens, wp, iterate)
    return LasotaYorkeReport(wp=wp, p=p, q=q, rows=tuple(rows),
                             sup_ratio=sup_ratio, gap_ok=gap_ok,
                             warnings=tuple(warnings))
