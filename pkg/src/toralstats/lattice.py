"""Exact integer linear algebra for random toral automorphisms.

A generator is a 2x2 integer matrix A with nonnegative entries, det A = 1
and trace A >= 3.  Such a matrix acts on the 2-torus by
T(x) = A x mod 1 and is hyperbolic (its eigenvalues are real, positive
and bounded away from 1).  Random compositions draw generators from a
fixed pair, so words over the alphabet {0, 1} label finite compositions.

Torus points are stored as pairs of 64-bit unsigned fixed-point fractions
(value = word / 2**64).  Because the maps are integer matrices, the map
action is exact: multiplication and reduction mod 2**64 commute with the
projection to the torus, and the adjugate matrix inverts the action
bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

MASK64 = (1 << 64) - 1

# Word composition refuses to grow entries past signed 128-bit range instead
# of producing numbers whose downstream float conversions silently lose
# structure; periodic-point counts are exact only below this bound.
ENTRY_BOUND = 1 << 127


class CompositionOverflowError(OverflowError):
    """Raised when a composed word's entries leave the checked integer range."""

    def __init__(self, word_length: int, bound: int) -> None:
        self.word_length = word_length
        self.bound = bound
        super().__init__(
            f"entry bound {bound} exceeded after composing {word_length} letters"
        )


@dataclass(frozen=True)
class IntMatrix:
    """Immutable 2x2 integer matrix with exact arithmetic."""

    rows: tuple[tuple[int, int], tuple[int, int]]

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> IntMatrix:
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise ValueError(f"expected a 2x2 matrix, got {rows!r}")
        flat = [e for r in rows for e in r]
        if not all(isinstance(e, int) for e in flat):
            raise ValueError(f"matrix entries must be integers, got {rows!r}")
        return cls(((int(rows[0][0]), int(rows[0][1])),
                    (int(rows[1][0]), int(rows[1][1]))))

    @classmethod
    def identity(cls) -> IntMatrix:
        return cls(((1, 0), (0, 1)))

    def det(self) -> int:
        (a, b), (c, d) = self.rows
        return a * d - b * c

    def trace(self) -> int:
        return self.rows[0][0] + self.rows[1][1]

    def transpose(self) -> IntMatrix:
        (a, b), (c, d) = self.rows
        return IntMatrix(((a, c), (b, d)))

    def adjugate(self) -> IntMatrix:
        """Return adj(A); for det A = 1 this is the exact inverse."""
        (a, b), (c, d) = self.rows
        return IntMatrix(((d, -b), (-c, a)))

    def __matmul__(self, other: IntMatrix) -> IntMatrix:
        (a, b), (c, d) = self.rows
        (e, f), (g, h) = other.rows
        return IntMatrix(((a * e + b * g, a * f + b * h),
                          (c * e + d * g, c * f + d * h)))

    def mul_vec(self, v: tuple[int, int]) -> tuple[int, int]:
        (a, b), (c, d) = self.rows
        return (a * v[0] + b * v[1], c * v[0] + d * v[1])

    def max_abs_entry(self) -> int:
        return max(abs(e) for r in self.rows for e in r)

    def __str__(self) -> str:
        (a, b), (c, d) = self.rows
        return f"[[{a}, {b}], [{c}, {d}]]"


@dataclass(frozen=True)
class TorusPoint:
    """Point of the 2-torus in 64-bit unsigned fixed-point coordinates.

    Coordinate i represents the real number coords[i] / 2**64 in [0, 1).
    Reduction mod 1 on the torus is reduction mod 2**64 on the words, so
    integer matrix actions are exact and wrap without error.
    """

    coords: tuple[int, int]

    def __post_init__(self) -> None:
        if any(not (0 <= c <= MASK64) for c in self.coords):
            raise ValueError(f"coordinates must be 64-bit words, got {self.coords!r}")

    @classmethod
    def from_floats(cls, x: Sequence[float]) -> TorusPoint:
        """Quantize a real point to the fixed-point grid (rounds toward zero)."""
        return cls(tuple(int((v % 1.0) * 2.0**64) & MASK64 for v in x))

    def to_floats(self) -> tuple[float, float]:
        return (self.coords[0] * 2.0**-64, self.coords[1] * 2.0**-64)


@dataclass(frozen=True)
class MapWord:
    """Finite word over the generator alphabet {0, 1}.

    symbols[0] is applied first: the word (w1, ..., wk) composes to
    A_{wk} ... A_{w1}.
    """

    symbols: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(s not in (0, 1) for s in self.symbols):
            raise ValueError(f"word symbols must be 0 or 1, got {self.symbols!r}")

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[int]:
        return iter(self.symbols)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the generator admissibility check."""

    ok: bool
    failures: tuple[str, ...]


@dataclass(frozen=True)
class ConeConstants:
    """One-step expansion data over the positive cone C+ = {v1 * v2 >= 0}.

    lam_min and lam_max are the exact extrema of |A^T v| / |v| over unit
    vectors v in C+, minimized / maximized over both generators.  c0 = 1
    because C+ is invariant under both transposes, so n-step products
    inherit the one-step bounds by submultiplicativity.  beta is the
    smallest cone-opening parameter with A_i^{-1} C- contained in
    C_beta = {beta**-1 * v1**2 <= -v1*v2 <= beta * v1**2} for both i.
    """

    lam_min: float
    lam_max: float
    c0: float
    beta: float


class ProductClass(Enum):
    """Conjugacy type of the product A_1 A_0^{-1} in SL(2, Z)."""

    HYPERBOLIC = "hyperbolic"
    PARABOLIC = "parabolic"
    ELLIPTIC_OR_FINITE = "elliptic_or_finite"


def validate_generator(m: IntMatrix) -> ValidationReport:
    """Check the standing assumptions on a single generator.

    The conditions (nonnegative integer entries, determinant one, trace at
    least three) force every entry to be >= 1, which is what the lattice
    escape argument in the correlation engine relies on.  Trace exactly 3
    is admitted; it is the smallest hyperbolic trace in this family.
    """
    failures: list[str] = []
    if any(e < 0 for r in m.rows for e in r):
        failures.append(f"entries must be nonnegative, got {m}")
    if m.det() != 1:
        failures.append(f"determinant must be 1, got {m.det()}")
    if m.trace() < 3:
        failures.append(f"trace must be at least 3, got {m.trace()}")
    return ValidationReport(ok=not failures, failures=tuple(failures))


@dataclass(frozen=True)
class GeneratorPair:
    """Validated pair of generators driving the random composition."""

    m0: IntMatrix
    m1: IntMatrix

    @classmethod
    def of(cls, m0: IntMatrix, m1: IntMatrix) -> GeneratorPair:
        failures = []
        for name, m in (("generator 0", m0), ("generator 1", m1)):
            report = validate_generator(m)
            failures.extend(f"{name}: {msg}" for msg in report.failures)
        if failures:
            raise ValueError("invalid generator pair: " + "; ".join(failures))
        return cls(m0, m1)

    def __getitem__(self, i: int) -> IntMatrix:
        if i == 0:
            return self.m0
        if i == 1:
            return self.m1
        raise IndexError(f"generator index must be 0 or 1, got {i}")

    def transposes(self) -> tuple[IntMatrix, IntMatrix]:
        return (self.m0.transpose(), self.m1.transpose())

    def adjugates(self) -> tuple[IntMatrix, IntMatrix]:
        return (self.m0.adjugate(), self.m1.adjugate())


def compose_word(gens: GeneratorPair, word: MapWord | Sequence[int],
                 entry_bound: int = ENTRY_BOUND) -> IntMatrix:
    """Compose a word of generators: (w1, ..., wk) -> A_{wk} ... A_{w1}.

    Raises:
        CompositionOverflowError: if any intermediate entry leaves the
            checked range [-entry_bound, entry_bound); the error records
            the word length at which this happened.
    """
    symbols = word.symbols if isinstance(word, MapWord) else tuple(word)
    acc = IntMatrix.identity()
    for n, s in enumerate(symbols, start=1):
        acc = gens[s] @ acc
        if acc.max_abs_entry() >= entry_bound:
            raise CompositionOverflowError(word_length=n, bound=entry_bound)
    return acc


def apply_map(m: IntMatrix, x: TorusPoint) -> TorusPoint:
    """Apply x -> m x mod 1 exactly in fixed-point coordinates."""
    (a, b), (c, d) = m.rows
    x1, x2 = x.coords
    return TorusPoint(((a * x1 + b * x2) & MASK64, (c * x1 + d * x2) & MASK64))


def _sector_extrema(m: IntMatrix) -> tuple[float, float]:
    # Extrema of |m^T v| / |v| over unit v in the closed first quadrant.
    # The squared ratio is the Rayleigh quotient of G = m m^T, so critical
    # values sit at the sector boundary rays e1, e2 and at eigendirections
    # of G interior to the sector.
    (a, b), (c, d) = m.rows
    candidates = [math.hypot(a, b), math.hypot(c, d)]
    g00 = a * a + b * b
    g01 = a * c + b * d
    g11 = c * c + d * d
    half_tr = (g00 + g11) / 2.0
    disc = math.sqrt(half_tr * half_tr - (g00 * g11 - g01 * g01))
    for mu in (half_tr - disc, half_tr + disc):
        # eigenvector of G for eigenvalue mu, up to scale
        v = (g01, mu - g00) if abs(g01) >= abs(mu - g11) else (mu - g11, g01)
        if v[0] * v[1] >= 0 and mu > 0:
            candidates.append(math.sqrt(mu))
    return (min(candidates), max(candidates))


def hyperbolicity_constants(gens: GeneratorPair) -> ConeConstants:
    """Exact cone-expansion constants shared by both generators.

    The negative-cone image rays fix beta: applying each adjugate inverse
    to the boundary rays (1, 0) and (0, -1) of C- gives vectors w with
    slope data r = -w1*w2 / w1**2; beta is the smallest bound with
    1/beta <= r <= beta across both generators (the slope is monotone in
    the ray angle, so the extrema sit at the boundary rays).
    """
    lo0, hi0 = _sector_extrema(gens.m0)
    lo1, hi1 = _sector_extrema(gens.m1)
    ratios: list[float] = []
    for inv in gens.adjugates():
        for ray in ((1, 0), (0, -1)):
            w1, w2 = inv.mul_vec(ray)
            if w1 == 0:
                raise ValueError(f"degenerate cone image for ray {ray} under {inv}")
            ratios.append(-w1 * w2 / (w1 * w1))
    if min(ratios) <= 0:
        raise ValueError(f"inverse images leave the negative cone: ratios {ratios}")
    beta = max(max(ratios), 1.0 / min(ratios))
    return ConeConstants(lam_min=min(lo0, lo1), lam_max=max(hi0, hi1),
                         c0=1.0, beta=beta)


def conjugate_product(gens: GeneratorPair) -> IntMatrix:
    """The comparison map A_1 A_0^{-1} used by the ergodicity shortcut."""
    return gens.m1 @ gens.m0.adjugate()


def classify_conjugate_product(gens: GeneratorPair) -> ProductClass:
    """Classify A_1 A_0^{-1} up to conjugacy in SL(2, Z).

    Hyperbolic products make the pair of maps jointly rigid: the
    coboundary obstruction can then be settled by the ergodicity shortcut.
    Parabolic products (as for the default pair, where the product is a
    shear) leave a genuinely non-ergodic comparison map.
    """
    b = conjugate_product(gens)
    t = abs(b.trace())
    if t > 2:
        return ProductClass.HYPERBOLIC
    if t == 2 and b not in (IntMatrix.identity(),
                            IntMatrix(((-1, 0), (0, -1)))):
        return ProductClass.PARABOLIC
    return ProductClass.ELLIPTIC_OR_FINITE


def default_pair() -> GeneratorPair:
    """The default generator pair [[1,1],[2,3]], [[1,1],[1,2]].

    Both maps share the first row (1, 1), so observables of the form
    g - g o T inherit one common coboundary direction; their conjugate
    product is the parabolic shear (x1, x2) -> (x1, x2 - x1).
    """
    return GeneratorPair.of(IntMatrix.from_rows([[1, 1], [2, 3]]),
                            IntMatrix.from_rows([[1, 1], [1, 2]]))
