"""Periodic-orbit obstructions to vanishing variance.

The variance of the annealed CLT vanishes exactly when the observable is
a simultaneous measurable coboundary, and by the closing argument this
forces every closed-orbit sum to vanish: for each word w and each fixed
point x of T_w, sum f over the orbit of x.  A single nonzero orbit sum
therefore certifies positive variance; the converse scan up to a word
length k_max is only ever "inconclusive up to k_max".

Fixed points of an integer matrix word M are rational: (M - I) x in Z^2
is solved exactly through the Smith normal form U (M - I) V = diag(d1, d2),
giving the |det(M - I)| points x = V (i/d1, j/d2) mod 1.  Orbit sums are
evaluated in exact arithmetic over the residue classes of the common
denominator, so a telescoping coboundary cancels to literal zero rather
than to floating-point noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from itertools import product
from typing import Iterator, Sequence

import numpy as np

from .lattice import GeneratorPair, IntMatrix, MapWord, compose_word
from .observable import TrigPoly

ZERO_SUM_THRESHOLD = 1e-9

DEFAULT_WORD_BUDGET = 1 << 16


class EnumerationBudgetError(RuntimeError):
    """Raised when a word scan would enumerate more words than budgeted."""

    def __init__(self, word_count: int, budget: int) -> None:
        self.word_count = word_count
        self.budget = budget
        super().__init__(
            f"scan needs {word_count} words, budget allows {budget}")


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    # returns (g, x, y) with a x + b y = g >= 0
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        quo = old_r // r
        old_r, r = r, old_r - quo * r
        old_s, s = s, old_s - quo * s
        old_t, t = t, old_t - quo * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def smith_normal_form(m: IntMatrix) -> tuple[IntMatrix, IntMatrix, IntMatrix]:
    """Decompose U m V = D with U, V unimodular and D = diag(d1, d2), d1 | d2.

    Only nonsingular matrices are handled (all the composed words here
    have det(M - I) != 0).  Diagonal entries are normalized positive.
    """
    if m.det() == 0:
        raise ValueError(f"matrix must be nonsingular, got {m}")
    a = [list(m.rows[0]), list(m.rows[1])]
    u = [[1, 0], [0, 1]]
    v = [[1, 0], [0, 1]]

    def row_op(g_row: int, x: int, y: int, p: int, q: int) -> None:
        # rows (g_row, other) <- (x*row_g + y*row_o, p*row_g + q*row_o)
        o = 1 - g_row
        for mat in (a, u):
            rg = [x * mat[g_row][j] + y * mat[o][j] for j in range(2)]
            ro = [p * mat[g_row][j] + q * mat[o][j] for j in range(2)]
            mat[g_row], mat[o] = rg, ro

    def col_op(x: int, y: int, p: int, q: int) -> None:
        # cols <- (x*c0 + y*c1, p*c0 + q*c1)
        for mat in (a, v):
            for i in range(2):
                c0 = x * mat[i][0] + y * mat[i][1]
                c1 = p * mat[i][0] + q * mat[i][1]
                mat[i][0], mat[i][1] = c0, c1

    # When the pivot divides the off-diagonal entry a plain elimination
    # step zeroes it without disturbing the pivot; the Bezout op is saved
    # for the non-divisible case, where it strictly shrinks |pivot| to the
    # gcd.  Mixing the two is what makes the loop terminate (the Bezout op
    # alone can cycle by permuting rows or columns when the gcd is already
    # in the corner).
    for _ in range(128):
        if a[1][0] != 0:
            if a[0][0] != 0 and a[1][0] % a[0][0] == 0:
                row_op(0, 1, 0, -(a[1][0] // a[0][0]), 1)
            else:
                g, x, y = _xgcd(a[0][0], a[1][0])
                row_op(0, x, y, -(a[1][0] // g), a[0][0] // g)
        if a[0][1] != 0:
            if a[0][0] != 0 and a[0][1] % a[0][0] == 0:
                col_op(1, 0, -(a[0][1] // a[0][0]), 1)
            else:
                g, x, y = _xgcd(a[0][0], a[0][1])
                col_op(x, y, -(a[0][1] // g), a[0][0] // g)
        if a[1][0] == 0 and a[0][1] == 0:
            if a[1][1] % a[0][0] != 0:
                # pull d2 into the first column and restart the reduction
                col_op(1, 1, 0, 1)
                continue
            break
    else:
        raise AssertionError(f"Smith reduction failed to terminate for {m}")
    if a[0][0] < 0:
        row_op(0, -1, 0, 0, 1)
    if a[1][1] < 0:
        row_op(1, -1, 0, 0, 1)
    return (IntMatrix((tuple(u[0]), tuple(u[1]))),
            IntMatrix((tuple(a[0]), tuple(a[1]))),
            IntMatrix((tuple(v[0]), tuple(v[1]))))


@dataclass(frozen=True)
class PeriodicOrbit:
    """All fixed points of one composed word, as exact rationals."""

    word: MapWord
    points: tuple[tuple[Fraction, Fraction], ...]

    @property
    def count(self) -> int:
        return len(self.points)


def _fixed_point_grid(gens: GeneratorPair,
                      word: MapWord) -> tuple[int, np.ndarray]:
    """Fixed points as integer pairs P with x = P / q, q = |det(M_w - I)|."""
    if len(word) == 0:
        raise ValueError("the empty word fixes every point")
    m = compose_word(gens, word)
    (a, b), (c, d) = m.rows
    mi = IntMatrix(((a - 1, b), (c, d - 1)))
    det = mi.det()
    if det == 0:
        raise ValueError(f"degenerate word {word.symbols}: det(M - I) = 0")
    u, dd, v = smith_normal_form(mi)
    d1, d2 = dd.rows[0][0], dd.rows[1][1]
    q = d1 * d2
    if q >= 3_037_000_499:  # isqrt(2**63): keeps q * q inside int64
        raise ValueError(
            f"word {word.symbols} has {q} fixed points; too many for the "
            f"vectorized residue tables")
    # x = V (i/d1, j/d2) mod 1  ->  P = V (i*d2, j*d1) mod q
    i = np.arange(d1, dtype=np.int64)
    j = np.arange(d2, dtype=np.int64)
    y1 = (i[:, None] * d2 + 0 * j[None, :]).ravel()
    y2 = (0 * i[:, None] + j[None, :] * d1).ravel()
    (v11, v12), (v21, v22) = v.rows
    p1 = (v11 * y1 + v12 * y2) % q
    p2 = (v21 * y1 + v22 * y2) % q
    return q, np.stack([p1, p2], axis=1)


def fixed_points(gens: GeneratorPair,
                 word: MapWord | Sequence[int]) -> PeriodicOrbit:
    """Exact fixed points of the composed word T_w, via Smith normal form.

    The count always equals |det(M_w - I)|; points are reduced fractions.
    """
    if not isinstance(word, MapWord):
        word = MapWord(tuple(word))
    q, grid = _fixed_point_grid(gens, word)
    pts = tuple((Fraction(int(p1), q), Fraction(int(p2), q))
                for p1, p2 in grid)
    return PeriodicOrbit(word=word, points=pts)


@dataclass(frozen=True)
class OrbitSum:
    """Birkhoff sum of f over one closed orbit.

    exact_zero is set when rational-coefficient residue accounting
    cancelled the sum identically; zero_candidate additionally covers
    float sums below the reporting threshold.
    """

    point: tuple[Fraction, Fraction]
    value: float
    exact_zero: bool

    @property
    def zero_candidate(self) -> bool:
        return self.exact_zero or abs(self.value) < ZERO_SUM_THRESHOLD


def _orbit_phase_table(gens: GeneratorPair, word: MapWord, q: int,
                       grid: np.ndarray,
                       f: TrigPoly) -> tuple[np.ndarray, list]:
    """Residues <k, x_j> * q mod q for every fixed point, step and index."""
    ks = sorted(f.coeffs)
    coeffs = [f.coeffs[k] for k in ks]
    n_pts = grid.shape[0]
    steps = len(word)
    residues = np.empty((n_pts, steps * len(ks)), dtype=np.int64)
    p1 = grid[:, 0].copy()
    p2 = grid[:, 1].copy()
    col = 0
    for j, sym in enumerate(word.symbols):
        for k in ks:
            residues[:, col] = (k[0] * p1 + k[1] * p2) % q
            col += 1
        (a, b), (c, d) = gens[sym].rows
        p1, p2 = (a * p1 + b * p2) % q, (c * p1 + d * p2) % q
    return residues, coeffs


# roots-of-unity lookup tables pay off until they stop fitting in cache
_ROOTS_TABLE_LIMIT = 1 << 22


def _orbit_sum_arrays(gens: GeneratorPair, f: TrigPoly, word: MapWord
                      ) -> tuple[int, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized core of orbit_sums: (q, grid, values, exact) arrays.

    The exact-cancellation pass runs first so float phases are only
    evaluated at points it could not settle; a scan over a telescoping
    coboundary then never touches a complex exponential.
    """
    q, grid = _fixed_point_grid(gens, word)
    residues, coeffs = _orbit_phase_table(gens, word, q, grid, f)
    steps = len(word)
    n_pts = grid.shape[0]

    exact = np.zeros(n_pts, dtype=bool)
    if f.is_rational and coeffs:
        denom = math.lcm(*[c.denominator for c in coeffs])
        nums = np.array([int(c * denom) for c in coeffs] * steps,
                        dtype=np.int64)
        order = np.argsort(residues, axis=1, kind="stable")
        sorted_res = np.take_along_axis(residues, order, axis=1)
        sorted_w = np.broadcast_to(nums, residues.shape)
        sorted_w = np.take_along_axis(sorted_w, order, axis=1)
        prefix = np.cumsum(sorted_w, axis=1)
        boundary = np.ones_like(sorted_res, dtype=bool)
        boundary[:, :-1] = sorted_res[:, 1:] != sorted_res[:, :-1]
        exact = np.all(np.where(boundary, prefix, 0) == 0, axis=1)

    # float values: sum Re(c * e^{2 pi i r / q}) over all steps and indices
    values = np.zeros(n_pts)
    todo = np.flatnonzero(~exact)
    if todo.size and coeffs:
        weights = np.array([complex(c) for c in coeffs] * steps)
        if q <= _ROOTS_TABLE_LIMIT:
            roots = np.exp((2j * math.pi / q) * np.arange(q))
            phase = roots[residues[todo]]
        else:
            phase = np.exp((2j * math.pi / q) * residues[todo])
        values[todo] = (phase @ weights).real
    return q, grid, values, exact


def orbit_sums(gens: GeneratorPair, f: TrigPoly,
               word: MapWord | Sequence[int]) -> list[OrbitSum]:
    """Orbit sums sum_j f(x_j) over every fixed point of the word.

    x_j = T_{w_j} ... T_{w_1} x walks the orbit (x_0 = x); all points are
    exact rationals with common denominator q = |det(M_w - I)|, so the
    phases <k, x_j> are residues mod q and rational coefficients allow
    exact cancellation tests.
    """
    if not isinstance(word, MapWord):
        word = MapWord(tuple(word))
    if f.dim != 1:
        raise ValueError("orbit sums are defined for d = 1 observables")
    q, grid, values, exact = _orbit_sum_arrays(gens, f, word)
    return [OrbitSum(point=(Fraction(int(p1), q), Fraction(int(p2), q)),
                     value=float(val), exact_zero=bool(ex))
            for (p1, p2), val, ex in zip(grid, values, exact)]


class CoboundaryVerdict(Enum):
    POSITIVE_VARIANCE = "positive_variance"
    INCONCLUSIVE = "inconclusive_up_to_k_max"


@dataclass(frozen=True)
class ObstructionWitness:
    word: tuple[int, ...]
    point: tuple[Fraction, Fraction]
    orbit_sum: float


@dataclass(frozen=True)
class CoboundaryReport:
    verdict: CoboundaryVerdict
    reason: str
    k_max: int
    witness: ObstructionWitness | None
    words_scanned: int


def _words(alphabet: Sequence[int], k_max: int) -> Iterator[tuple[int, ...]]:
    for length in range(1, k_max + 1):
        yield from product(alphabet, repeat=length)


def coboundary_obstruction(gens: GeneratorPair, f: TrigPoly, k_max: int,
                           admissible: Sequence[int] = (0, 1),
                           word_budget: int = DEFAULT_WORD_BUDGET
                           ) -> CoboundaryReport:
    """Scan closed orbits for a nonzero sum certifying positive variance.

    Shortcut: when both generators are admissible and T_1 T_0^{-1} is
    hyperbolic (hence ergodic), any nonzero f already forces positive
    variance and no scan is needed.  Otherwise words over the admissible
    alphabet are scanned in length order; the first orbit sum with
    |sum| >= 1e-9 (and not exactly cancelled) is returned as a witness.

    Args:
        k_max: largest word length scanned.
        admissible: generator indices the environment may use (a
            degenerate wp of 0 or 1 restricts the alphabet to one symbol).
        word_budget: hard cap on the number of words; exceeding it raises
            EnumerationBudgetError instead of scanning.
    """
    from .lattice import ProductClass, classify_conjugate_product

    alphabet = tuple(dict.fromkeys(int(s) for s in admissible))
    if not alphabet or any(s not in (0, 1) for s in alphabet):
        raise ValueError(f"admissible symbols must be among (0, 1), "
                         f"got {admissible}")
    if k_max < 1:
        raise ValueError(f"k_max must be at least 1, got {k_max}")
    if not f.coeffs:
        return CoboundaryReport(
            verdict=CoboundaryVerdict.INCONCLUSIVE,
            reason="the zero observable is a trivial coboundary",
            k_max=k_max, witness=None, words_scanned=0)
    if len(alphabet) == 2 \
            and classify_conjugate_product(gens) is ProductClass.HYPERBOLIC:
        return CoboundaryReport(
            verdict=CoboundaryVerdict.POSITIVE_VARIANCE,
            reason="comparison map T_1 T_0^{-1} is hyperbolic, hence "
                   "ergodic: no nonzero observable is a joint coboundary",
            k_max=k_max, witness=None, words_scanned=0)
    n_words = sum(len(alphabet) ** k for k in range(1, k_max + 1))
    if n_words > word_budget:
        raise EnumerationBudgetError(n_words, word_budget)
    scanned = 0
    for symbols in _words(alphabet, k_max):
        scanned += 1
        q, grid, values, exact = _orbit_sum_arrays(gens, f, MapWord(symbols))
        loud = np.flatnonzero(~exact & (np.abs(values) >= ZERO_SUM_THRESHOLD))
        if loud.size:
            i = int(loud[0])
            point = (Fraction(int(grid[i, 0]), q),
                     Fraction(int(grid[i, 1]), q))
            value = float(values[i])
            return CoboundaryReport(
                verdict=CoboundaryVerdict.POSITIVE_VARIANCE,
                reason=f"orbit sum {value:.6g} at a period-"
                       f"{len(symbols)} point",
                k_max=k_max,
                witness=ObstructionWitness(word=symbols, point=point,
                                           orbit_sum=value),
                words_scanned=scanned)
    return CoboundaryReport(
        verdict=CoboundaryVerdict.INCONCLUSIVE,
        reason=f"all orbit sums vanish for words up to length {k_max}",
        k_max=k_max, witness=None, words_scanned=scanned)
