"""Sparse trigonometric polynomials on the 2d-torus and their norms.

Observables are finite Fourier sums f(x) = sum_k f_k e^{2 pi i <k, x>}
indexed by integer vectors k.  Two coefficient modes coexist:

* rational mode: every coefficient is a `fractions.Fraction` (so f is a
  real, even cosine polynomial) and all sparse-sum operations are exact;
* float mode: coefficients are `complex` and operations are ordinary
  floating point.

The anisotropic norm trades index growth against decay along a movable
line: for d = 1 a Lagrangian subspace inside the negative cone is a line
spanned by u(theta) = (cos theta, sin theta) with theta in [pi/2, pi],
and

    N(theta) = |f_0| + sum_{k != 0} |f_k| |k|^p / (1 + |<u(theta), k>|^(p+q)),

with the norm the supremum of N over theta.  The supremum is certified by
a Lipschitz bound in theta, so the grid search below returns a value with
a known accuracy.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, NamedTuple, Sequence, Union

import numpy as np

from .lattice import TorusPoint

Coefficient = Union[Fraction, complex]
Index = tuple[int, ...]

_TWO_PI = 2.0 * math.pi


def _conj(c: Coefficient) -> Coefficient:
    if isinstance(c, Fraction):
        return c
    return complex(c).conjugate()


def _is_zero(c: Coefficient) -> bool:
    return c == 0


class TrigPoly:
    """Finite Fourier sum with exact sparse-coefficient arithmetic.

    Args:
        coeffs: mapping from integer index tuples (length 2 for d = 1,
            length 4 for the doubled system) to coefficients.  Exact zeros
            are dropped.  If every coefficient is a Fraction the polynomial
            runs in rational mode.
        dim: number of torus factors d; inferred from the keys when omitted.
    """

    __slots__ = ("coeffs", "dim", "is_rational", "is_real")

    def __init__(self, coeffs: Mapping[Index, Coefficient], dim: int | None = None):
        cleaned: dict[Index, Coefficient] = {}
        for k, c in coeffs.items():
            key = tuple(int(e) for e in k)
            if _is_zero(c):
                continue
            cleaned[key] = c
        if dim is None:
            if not cleaned:
                dim = 1
            else:
                width = len(next(iter(cleaned)))
                if width not in (2, 4):
                    raise ValueError(f"index width must be 2 or 4, got {width}")
                dim = width // 2
        if dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {dim}")
        width = 2 * dim
        if any(len(k) != width for k in cleaned):
            raise ValueError(f"all indices must have length {width}")
        rational = all(isinstance(c, Fraction) for c in cleaned.values())
        if not rational:
            cleaned = {k: complex(c) for k, c in cleaned.items()}
        real = all(cleaned.get(_neg(k)) == _conj(c) for k, c in cleaned.items())
        self.coeffs = cleaned
        self.dim = dim
        self.is_rational = rational
        self.is_real = real

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, dim: int = 1) -> TrigPoly:
        return cls({}, dim=dim)

    @classmethod
    def constant(cls, value: Coefficient, dim: int = 1) -> TrigPoly:
        return cls({(0,) * (2 * dim): value}, dim=dim)

    @classmethod
    def cosine(cls, k: Sequence[int], amplitude: Coefficient = 1) -> TrigPoly:
        """amplitude * cos(2 pi <k, x>), exact when amplitude is rational."""
        key = tuple(int(e) for e in k)
        if isinstance(amplitude, (int, Fraction)):
            half = Fraction(amplitude, 2)
        else:
            half = complex(amplitude) / 2.0
        if key == _neg(key):  # k = 0: the two half-terms share one slot
            return cls({key: half + half})
        return cls({key: half, _neg(key): half})

    @classmethod
    def sine(cls, k: Sequence[int], amplitude: float = 1.0) -> TrigPoly:
        """amplitude * sin(2 pi <k, x>); float mode (odd coefficients)."""
        key = tuple(int(e) for e in k)
        half = complex(amplitude) / 2.0
        if key == _neg(key):  # sin(0) = 0
            return cls({})
        return cls({key: -1j * half, _neg(key): 1j * half})

    # -- container-ish --------------------------------------------------

    def coeff(self, k: Sequence[int]) -> Coefficient:
        return self.coeffs.get(tuple(int(e) for e in k), _zero_like(self))

    @property
    def mean(self) -> Coefficient:
        return self.coeffs.get((0,) * (2 * self.dim), _zero_like(self))

    @property
    def support(self) -> frozenset[Index]:
        return frozenset(self.coeffs)

    @property
    def support_radius(self) -> int:
        """Max sup-norm of an index over the support (0 for the zero poly)."""
        return max((max(abs(e) for e in k) for k in self.coeffs), default=0)

    def support_radius_l1(self) -> int:
        return max((sum(abs(e) for e in k) for k in self.coeffs), default=0)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TrigPoly) and self.dim == other.dim \
            and self.coeffs == other.coeffs

    def __repr__(self) -> str:
        n = len(self.coeffs)
        mode = "rational" if self.is_rational else "float"
        return f"TrigPoly(dim={self.dim}, terms={n}, mode={mode})"

    # -- ring operations -------------------------------------------------

    def __add__(self, other: TrigPoly) -> TrigPoly:
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        out: dict[Index, Coefficient] = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return TrigPoly(out, dim=self.dim)

    def __neg__(self) -> TrigPoly:
        return TrigPoly({k: -c for k, c in self.coeffs.items()}, dim=self.dim)

    def __sub__(self, other: TrigPoly) -> TrigPoly:
        return self + (-other)

    def __mul__(self, other: TrigPoly | Coefficient) -> TrigPoly:
        if isinstance(other, TrigPoly):
            return multiply(self, other)
        return TrigPoly({k: c * other for k, c in self.coeffs.items()},
                        dim=self.dim)

    def __rmul__(self, other: Coefficient) -> TrigPoly:
        return self.__mul__(other)


def _neg(k: Index) -> Index:
    return tuple(-e for e in k)


def _zero_like(f: TrigPoly) -> Coefficient:
    return Fraction(0) if f.is_rational else 0j


def multiply(f: TrigPoly, g: TrigPoly) -> TrigPoly:
    """Pointwise product via coefficient convolution (exact in rational mode)."""
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    out: dict[Index, Coefficient] = {}
    for kf, cf in f.coeffs.items():
        for kg, cg in g.coeffs.items():
            key = tuple(a + b for a, b in zip(kf, kg))
            out[key] = out.get(key, 0) + cf * cg
    return TrigPoly(out, dim=f.dim)


def inner_product(f: TrigPoly, g: TrigPoly) -> Coefficient:
    """Bilinear pairing m(f g) = sum_k f_k g_{-k} (exact in rational mode)."""
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    small, large = (f, g) if len(f.coeffs) <= len(g.coeffs) else (g, f)
    total: Coefficient = Fraction(0) if (f.is_rational and g.is_rational) else 0j
    for k, c in small.coeffs.items():
        other = large.coeffs.get(_neg(k))
        if other is not None:
            total += c * other
    return total


def evaluate(f: TrigPoly, x: TorusPoint | Sequence[float]) -> float | complex:
    """Evaluate f at a torus point (coordinates converted to float once).

    Returns a real number when f has Hermitian-symmetric coefficients,
    otherwise the complex value.
    """
    if isinstance(x, TorusPoint):
        xs = x.to_floats()
    else:
        xs = tuple(float(v) for v in x)
    if len(xs) != 2 * f.dim:
        raise ValueError(f"point has {len(xs)} coordinates, expected {2 * f.dim}")
    total = 0j
    for k, c in f.coeffs.items():
        phase = _TWO_PI * sum(ki * xi for ki, xi in zip(k, xs))
        total += complex(c) * cmath.exp(1j * phase)
    return total.real if f.is_real else total


class PqNormValue(NamedTuple):
    value: float
    theta: float


@dataclass(frozen=True)
class LagrangianDirection:
    """Line through the origin inside the negative cone (d = 1 only)."""

    theta: float

    def __post_init__(self) -> None:
        if not (math.pi / 2 <= self.theta <= math.pi):
            raise ValueError(f"theta must lie in [pi/2, pi], got {self.theta}")

    def vector(self) -> tuple[float, float]:
        return (math.cos(self.theta), math.sin(self.theta))


def _pq_objective_terms(f: TrigPoly, p: float) -> list[tuple[float, int, int]]:
    terms = []
    for k, c in f.coeffs.items():
        if k == (0, 0):
            continue
        norm = math.hypot(*k)
        terms.append((abs(complex(c)) * norm**p, k[0], k[1]))
    return terms


_PQ_GRID_CAP = 1 << 24
_PQ_CHUNK = 1 << 20


def pq_norm(f: TrigPoly, p: float, q: float, tol: float = 1e-10) -> PqNormValue:
    """Anisotropic norm sup_theta N(theta) with certified accuracy tol.

    The objective N is Lipschitz in theta with constant
    L = (p + q) * sum_k |f_k| |k|^(p+1), because
    |d/dt (1 + |t|^s)^{-1}| <= s for s >= 1 and |d<u(theta), k>/dtheta| <= |k|.
    A uniform grid of spacing h therefore certifies the supremum within
    L h / 2; the grid is densified until L h / 2 <= tol and the best
    three brackets are polished by golden-section search.

    Args:
        f: observable with dim = 1 (the movable-subspace supremum in
            higher dimension is not implemented).
        p: index-growth exponent, >= 0 (the weak norm uses p - 1 = 0).
        q: decay exponent along the subspace, > 0 with p + q >= 1.
        tol: certified absolute accuracy of the returned supremum.

    Returns:
        PqNormValue(value, theta) with theta the achieved maximizer.

    Raises:
        ValueError: when the certificate would need more than 2^24 grid
            points, i.e. tol is not reachable for this observable.  Large
            support indices push the Lipschitz constant (and so the grid)
            up fast; callers iterating the transfer operator should loosen
            tol proportionally to the norm's own scale.
    """
    if f.dim != 1:
        raise ValueError("pq_norm is defined here for d = 1 only")
    if p < 0 or q <= 0 or p + q < 1:
        raise ValueError(f"need p >= 0, q > 0, p + q >= 1, got p={p}, q={q}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    base = abs(complex(f.mean))
    terms = _pq_objective_terms(f, p)
    if not terms:
        return PqNormValue(base, math.pi / 2)
    s = p + q

    def objective(theta: float) -> float:
        u1, u2 = math.cos(theta), math.sin(theta)
        total = base
        for w, k1, k2 in terms:
            total += w / (1.0 + abs(u1 * k1 + u2 * k2) ** s)
        return total

    lip = s * sum(w * math.hypot(k1, k2) for w, k1, k2 in terms)
    span = math.pi / 2
    n = max(2048, math.ceil(lip * span / (2.0 * tol)) + 1)
    if n > _PQ_GRID_CAP:
        raise ValueError(
            f"pq_norm tolerance failure: tol={tol:g} needs a {n}-point grid "
            f"(Lipschitz bound {lip:.6g}, cap {_PQ_GRID_CAP})")
    lo = math.pi / 2
    h = span / (n - 1)
    wv = [float(t[0]) for t in terms]
    k1v = [float(t[1]) for t in terms]
    k2v = [float(t[2]) for t in terms]
    top: list[tuple[float, int]] = []
    for start in range(0, n, _PQ_CHUNK):
        theta = lo + h * np.arange(start, min(start + _PQ_CHUNK, n))
        cu, su = np.cos(theta), np.sin(theta)
        vals = np.full(theta.shape, base)
        for w, a, b in zip(wv, k1v, k2v):
            vals += w / (1.0 + np.abs(cu * a + su * b) ** s)
        take = min(3, vals.size)
        for j in np.argpartition(vals, vals.size - take)[-take:]:
            top.append((float(vals[j]), start + int(j)))
    top.sort(reverse=True)
    best_val, best_idx = top[0]
    best_theta = lo + h * best_idx
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    for _, idx in top[:3]:
        a = max(lo, lo + h * (idx - 1))
        b = min(math.pi, lo + h * (idx + 1))
        c, d = b - invphi * (b - a), a + invphi * (b - a)
        fc, fd = objective(c), objective(d)
        while b - a > tol * 1e-3 + 1e-15:
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = objective(c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = objective(d)
            if max(fc, fd) > best_val:
                best_val = max(fc, fd)
                best_theta = c if fc >= fd else d
    # grid + Lipschitz certificate: sup <= max(grid) + lip * h / 2 <= max + tol,
    # and refinement only raised the reported maximum
    assert lip * h / 2.0 <= tol * (1.0 + 1e-12)
    return PqNormValue(best_val, best_theta)


def r_seminorm(g: TrigPoly, r: float) -> float:
    """Decay seminorm sup_k |g_k| (1 + |k|^r) over the support."""
    if r < 0:
        raise ValueError(f"r must be nonnegative, got {r}")
    best = 0.0
    for k, c in g.coeffs.items():
        norm = math.hypot(*[float(e) for e in k])
        best = max(best, abs(complex(c)) * (1.0 + norm**r))
    return best


def cr_norm_upper(g: TrigPoly, r: int) -> float:
    """Upper bound sum_{s<=r} sum_k |g_k| (2 pi |k|)^s for the C^r norm.

    Each derivative of order s picks up a factor (2 pi |<k, v>|) <= 2 pi |k|
    in the worst direction v, so this dominates sum_s sup |g^(s)|.
    """
    if r < 0 or int(r) != r:
        raise ValueError(f"r must be a nonnegative integer, got {r}")
    total = 0.0
    for k, c in g.coeffs.items():
        norm = _TWO_PI * math.hypot(*[float(e) for e in k])
        w = abs(complex(c))
        total += w * sum(norm**s for s in range(int(r) + 1)) if norm > 0 \
            else w  # only s = 0 survives at k = 0
    return total


def random_real_polynomial(rng, max_index: int = 3, n_pairs: int = 4,
                           rational: bool = True, dim: int = 1,
                           zero_mean: bool = True) -> TrigPoly:
    """Random even real polynomial for property tests (cosine combinations).

    Coefficients are Fractions with denominator 8 in rational mode, floats
    otherwise; indices are drawn from the sup-norm ball of radius max_index.
    """
    width = 2 * dim
    out = TrigPoly.zero(dim)
    for _ in range(n_pairs):
        k = tuple(rng.randint(-max_index, max_index) for _ in range(width))
        if all(e == 0 for e in k):
            continue
        num = rng.randint(-8, 8)
        if num == 0:
            continue
        amp: Coefficient = Fraction(num, 8) if rational else num / 8.0
        out = out + TrigPoly.cosine(k, amp)
    if not zero_mean:
        out = out + TrigPoly.constant(Fraction(1, 2) if rational else 0.5, dim)
    return out
