"""Monte Carlo statistics for random compositions of toral automorphisms.

Trajectories are exact: points live on the 2**-64 fixed-point grid and
the generator matrices act by integer multiplication mod 2**64, so there
is no floating-point drift however long the orbit.  Floats enter only
when an observable is evaluated.

Randomness layout (see rng.py for the generator): every public sampler
takes a single 64-bit seed and derives documented substreams

    tag 0: quenched word symbols (sample_environment)
    tag 1: initial points, two 64-bit words per point
    tag 2: per-sample word symbols (annealed / paired drivers)

Annealed symbol words are indexed counter-style by step * width + sample,
so results are independent of internal chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .lattice import GeneratorPair, IntMatrix, MapWord, TorusPoint, apply_map
from .observable import TrigPoly
from .rng import CounterStream

_TAG_WORD = 0
_TAG_STARTS = 1
_TAG_SYMBOLS = 2

_TWO_PI = 2.0 * math.pi
_INV64 = 2.0**-64
_Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class Environment:
    """A frozen quenched environment: one word drawn from B_wp."""

    wp: float
    seed: int
    word: MapWord

    def __len__(self) -> int:
        return len(self.word)


def sample_environment(wp: float, n_steps: int, seed: int) -> Environment:
    """Draw a length-N word with P(symbol 0) = wp from the seed's tag-0 stream."""
    if not 0 <= wp <= 1:
        raise ValueError(f"wp must lie in [0, 1], got {wp}")
    if n_steps < 0:
        raise ValueError(f"word length must be nonnegative, got {n_steps}")
    stream = CounterStream(seed).child(_TAG_WORD)
    u = stream.uniform_block(0, n_steps)
    symbols = tuple(int(s) for s in (u >= wp).astype(np.uint8))
    return Environment(wp=float(wp), seed=seed, word=MapWord(symbols))


# -- vectorized exact dynamics -------------------------------------------


def _mat_words(m: IntMatrix) -> tuple[np.uint64, np.uint64, np.uint64, np.uint64]:
    (a, b), (c, d) = m.rows
    mask = (1 << 64) - 1
    return tuple(np.uint64(e & mask) for e in (a, b, c, d))


def _prepared_evaluator(f: TrigPoly) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Compile a real observable into a vectorized evaluator on float coords."""
    if f.dim != 1:
        raise ValueError("samplers run on the 2-torus (d = 1)")
    if not f.is_real:
        raise ValueError("samplers need a real observable")
    const = 0.0
    pairs: list[tuple[int, int, float, float]] = []
    seen: set[tuple[int, int]] = set()
    for k, c in f.coeffs.items():
        if k == (0, 0):
            const = complex(c).real
            continue
        if k in seen:
            continue
        seen.add(k)
        seen.add((-k[0], -k[1]))
        cc = complex(c)
        # c e^{i t} + conj(c) e^{-i t} = 2 Re(c) cos t - 2 Im(c) sin t
        pairs.append((k[0], k[1], 2.0 * cc.real, -2.0 * cc.imag))

    def evaluate_block(xf1: np.ndarray, xf2: np.ndarray) -> np.ndarray:
        total = np.full(np.broadcast(xf1, xf2).shape, const)
        for k1, k2, a_cos, a_sin in pairs:
            theta = _TWO_PI * (k1 * xf1 + k2 * xf2)
            total += a_cos * np.cos(theta)
            if a_sin != 0.0:
                total += a_sin * np.sin(theta)
        return total

    return evaluate_block


def _uniform_starts(stream: CounterStream, count: int,
                    shape: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    words = stream.u64_block(0, 2 * count)
    return words[:count].reshape(shape), words[count:].reshape(shape)


def _run_birkhoff(gens: GeneratorPair, f: TrigPoly, x1: np.ndarray,
                  x2: np.ndarray, n_steps: int,
                  symbols_at: Callable[[int], object],
                  checkpoints: Sequence[int] | None = None
                  ) -> dict[int, np.ndarray]:
    """Accumulate S_n = sum_{k<n} f(x_k) along exact trajectories.

    symbols_at(step) returns either a scalar symbol (shared word) or a
    boolean mask, True where generator 0 acts (per-sample words).  The
    returned dict maps each checkpoint n to a copy of S_n.
    """
    a0, b0, c0, d0 = _mat_words(gens.m0)
    a1, b1, c1, d1 = _mat_words(gens.m1)
    evaluate_block = _prepared_evaluator(f)
    cps = {n_steps} if checkpoints is None else set(checkpoints)
    if any(n < 0 or n > n_steps for n in cps):
        raise ValueError(f"checkpoints must lie in [0, {n_steps}]")
    s = np.zeros(np.broadcast(x1, x2).shape)
    out: dict[int, np.ndarray] = {}
    if 0 in cps:
        out[0] = s.copy()
    for step in range(n_steps):
        xf1 = x1.astype(np.float64) * _INV64
        xf2 = x2.astype(np.float64) * _INV64
        s += evaluate_block(xf1, xf2)
        sym = symbols_at(step)
        if isinstance(sym, (int, np.integer)):
            if sym == 0:
                y1 = a0 * x1 + b0 * x2
                y2 = c0 * x1 + d0 * x2
            else:
                y1 = a1 * x1 + b1 * x2
                y2 = c1 * x1 + d1 * x2
        else:
            y1 = np.where(sym, a0 * x1 + b0 * x2, a1 * x1 + b1 * x2)
            y2 = np.where(sym, c0 * x1 + d0 * x2, c1 * x1 + d1 * x2)
        x1, x2 = y1, y2
        if step + 1 in cps:
            out[step + 1] = s.copy()
    return out


def birkhoff_sum(gens: GeneratorPair, f: TrigPoly, env: Environment,
                 x0: TorusPoint, n_steps: int) -> float:
    """Single-trajectory Birkhoff sum S_N = sum_{k<N} f(x_k), exact orbit."""
    if n_steps > len(env):
        raise ValueError(f"word has {len(env)} symbols, needs {n_steps}")
    symbols = env.word.symbols
    x = x0
    total = 0.0
    from .observable import evaluate
    for k in range(n_steps):
        total += float(evaluate(f, x))
        x = apply_map(gens[symbols[k]], x)
    return total


def _quenched_sample_matrix(gens: GeneratorPair, f: TrigPoly, env: Environment,
                            checkpoints: Sequence[int], n_samples: int,
                            seed: int) -> dict[int, np.ndarray]:
    n_max = max(checkpoints)
    if n_max > len(env):
        raise ValueError(f"word has {len(env)} symbols, needs {n_max}")
    sym = np.array(env.word.symbols[:n_max], dtype=np.uint8)
    starts = CounterStream(seed).child(_TAG_STARTS)
    x1, x2 = _uniform_starts(starts, n_samples, (n_samples,))
    sums = _run_birkhoff(gens, f, x1, x2, n_max,
                         lambda step: int(sym[step]), checkpoints)
    return {n: s / math.sqrt(n) if n else s for n, s in sums.items()}


def quenched_samples(gens: GeneratorPair, f: TrigPoly, env: Environment,
                     n_steps: int, n_samples: int, seed: int) -> np.ndarray:
    """Samples of S_N / sqrt(N): shared word, independent uniform starts."""
    return _quenched_sample_matrix(gens, f, env, [n_steps], n_samples,
                                   seed)[n_steps]


def annealed_samples(gens: GeneratorPair, f: TrigPoly, wp: float,
                     n_steps: int, n_samples: int, seed: int) -> np.ndarray:
    """Samples of S_N / sqrt(N): independent word and start per sample."""
    if not 0 <= wp <= 1:
        raise ValueError(f"wp must lie in [0, 1], got {wp}")
    base = CounterStream(seed)
    starts = base.child(_TAG_STARTS)
    symbols = base.child(_TAG_SYMBOLS)
    x1, x2 = _uniform_starts(starts, n_samples, (n_samples,))

    def symbols_at(step: int) -> np.ndarray:
        u = symbols.uniform_block(step * n_samples, n_samples)
        return u < wp

    s = _run_birkhoff(gens, f, x1, x2, n_steps, symbols_at)[n_steps]
    return s / math.sqrt(n_steps)


# -- statistics ----------------------------------------------------------


@dataclass(frozen=True)
class SampleStats:
    """Moments of a scalar sample with standard errors.

    stderr is the standard error of the mean, sqrt(variance / count);
    variance_stderr estimates the standard error of the sample variance
    from the fourth central moment.
    """

    count: int
    mean: float
    variance: float
    stderr: float
    variance_stderr: float

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> SampleStats:
        n = int(samples.size)
        if n < 2:
            raise ValueError(f"need at least 2 samples, got {n}")
        mean = float(np.mean(samples))
        var = float(np.var(samples, ddof=1))
        centered = samples - mean
        m4 = float(np.mean(centered**4))
        var_of_var = max((m4 - (n - 3) / (n - 1) * var * var) / n, 0.0)
        return cls(count=n, mean=mean, variance=var,
                   stderr=math.sqrt(var / n),
                   variance_stderr=math.sqrt(var_of_var))


@dataclass(frozen=True)
class CharFnEstimate:
    """Empirical characteristic function value with componentwise stderr."""

    value: complex
    stderr_re: float
    stderr_im: float
    count: int


def char_fn_from_samples(samples: np.ndarray, lambda_: float) -> CharFnEstimate:
    vals = np.exp(1j * lambda_ * samples)
    n = vals.size
    return CharFnEstimate(
        value=complex(vals.mean()),
        stderr_re=float(np.std(vals.real, ddof=1) / math.sqrt(n)),
        stderr_im=float(np.std(vals.imag, ddof=1) / math.sqrt(n)),
        count=int(n),
    )


def quenched_char_fn(gens: GeneratorPair, f: TrigPoly, env: Environment,
                     lambda_: float, n_steps: int, n_samples: int,
                     seed: int) -> CharFnEstimate:
    """E_x e^{i lambda S_N / sqrt(N)} for one frozen word."""
    return char_fn_from_samples(
        quenched_samples(gens, f, env, n_steps, n_samples, seed), lambda_)


def quenched_char_fn_ladder(gens: GeneratorPair, f: TrigPoly, env: Environment,
                            lambda_: float, ns: Sequence[int], n_samples: int,
                            seed: int) -> dict[int, CharFnEstimate]:
    """Characteristic function at several horizons from one trajectory batch.

    The same M trajectories are read at each checkpoint, which is the
    cheap way to profile concentration in N; estimates across horizons
    are therefore correlated (each one is still unbiased).
    """
    mat = _quenched_sample_matrix(gens, f, env, list(ns), n_samples, seed)
    return {n: char_fn_from_samples(mat[n], lambda_) for n in ns}


def annealed_char_fn(gens: GeneratorPair, f: TrigPoly, wp: float,
                     lambda_: float, n_steps: int, n_samples: int,
                     seed: int) -> CharFnEstimate:
    """E e^{i lambda S_N / sqrt(N)} under the annealed law."""
    return char_fn_from_samples(
        annealed_samples(gens, f, wp, n_steps, n_samples, seed), lambda_)


def empirical_variance_quenched(gens: GeneratorPair, f: TrigPoly,
                                env: Environment, n_steps: int,
                                n_samples: int, seed: int) -> SampleStats:
    return SampleStats.from_samples(
        quenched_samples(gens, f, env, n_steps, n_samples, seed))


def empirical_variance_annealed(gens: GeneratorPair, f: TrigPoly, wp: float,
                                n_steps: int, n_samples: int,
                                seed: int) -> SampleStats:
    return SampleStats.from_samples(
        annealed_samples(gens, f, wp, n_steps, n_samples, seed))


def correlation_mc(gens: GeneratorPair, f: TrigPoly, n: int, wp: float,
                   n_samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of c_n = E[f(x_0) f(x_n)] with its stderr."""
    if n < 0:
        raise ValueError(f"lag must be nonnegative, got {n}")
    base = CounterStream(seed)
    starts = base.child(_TAG_STARTS)
    symbols = base.child(_TAG_SYMBOLS)
    x1, x2 = _uniform_starts(starts, n_samples, (n_samples,))
    evaluate_block = _prepared_evaluator(f)
    f0 = evaluate_block(x1.astype(np.float64) * _INV64,
                        x2.astype(np.float64) * _INV64)
    a0, b0, c0, d0 = _mat_words(gens.m0)
    a1, b1, c1, d1 = _mat_words(gens.m1)
    for step in range(n):
        u = symbols.uniform_block(step * n_samples, n_samples)
        mask = u < wp
        y1 = np.where(mask, a0 * x1 + b0 * x2, a1 * x1 + b1 * x2)
        y2 = np.where(mask, c0 * x1 + d0 * x2, c1 * x1 + d1 * x2)
        x1, x2 = y1, y2
    fn = evaluate_block(x1.astype(np.float64) * _INV64,
                        x2.astype(np.float64) * _INV64)
    prod = f0 * fn
    return float(prod.mean()), float(np.std(prod, ddof=1) / math.sqrt(n_samples))


def ks_distance_to_normal(samples: np.ndarray, sigma2: float) -> float:
    """Two-sided Kolmogorov-Smirnov distance to the centered normal N(0, sigma2).

    The normal CDF is evaluated through math.erf (correctly rounded to
    double precision, comfortably below the 1e-7 accuracy this check
    needs).
    """
    xs = np.sort(np.asarray(samples, dtype=np.float64))
    n = xs.size
    if n == 0:
        raise ValueError("need at least one sample")
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    scale = 1.0 / math.sqrt(2.0 * sigma2)
    cdf = np.array([0.5 * (1.0 + math.erf(v * scale)) for v in xs])
    lo = np.arange(n) / n
    hi = np.arange(1, n + 1) / n
    return float(np.max(np.maximum(cdf - lo, hi - cdf)))


def wilson_interval(hits: int, count: int,
                    z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if count <= 0:
        raise ValueError(f"count must be positive, got {count}")
    if not 0 <= hits <= count:
        raise ValueError(f"hits must lie in [0, {count}], got {hits}")
    phat = hits / count
    z2 = z * z
    denom = 1.0 + z2 / count
    center = (phat + z2 / (2 * count)) / denom
    half = z * math.sqrt(phat * (1 - phat) / count
                         + z2 / (4 * count * count)) / denom
    # At phat = 0 (resp. 1) the exact endpoint is 0 (resp. 1); the
    # center - half cancellation leaves ~1e-19 of rounding noise, so pin it.
    low = 0.0 if hits == 0 else max(center - half, 0.0)
    high = 1.0 if hits == count else min(center + half, 1.0)
    return (low, high)


@dataclass(frozen=True)
class TailEstimate:
    """Empirical large-deviation tail frequency with 95% Wilson interval."""

    n_steps: int
    threshold: float
    hits: int
    count: int
    p_hat: float
    wilson_low: float
    wilson_high: float


def large_deviation_tail(gens: GeneratorPair, f: TrigPoly, wp: float,
                         n_steps: int, threshold: float, n_samples: int,
                         seed: int) -> TailEstimate:
    """Frequency of |S_N / N| >= threshold under the annealed law."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    scaled = annealed_samples(gens, f, wp, n_steps, n_samples, seed)
    time_avg = np.abs(scaled) / math.sqrt(n_steps)
    hits = int(np.count_nonzero(time_avg >= threshold))
    lo, hi = wilson_interval(hits, n_samples)
    return TailEstimate(n_steps=n_steps, threshold=threshold, hits=hits,
                        count=n_samples, p_hat=hits / n_samples,
                        wilson_low=lo, wilson_high=hi)


@dataclass(frozen=True)
class PairedMomentEstimate:
    """Across-word mean of the debiased |inner characteristic function|^2."""

    value: float
    stderr: float
    n_words: int
    n_starts: int


def paired_second_moment(gens: GeneratorPair, f: TrigPoly, wp: float,
                         lambda_: float, n_steps: int, n_words: int,
                         n_starts: int, seed: int) -> PairedMomentEstimate:
    """Estimate E_omega |E_x e^{i lambda S_N / sqrt(N)}|^2.

    Pairs of trajectories sharing a word are what the doubled system
    describes; the limit of this quantity is e^{-lambda^2 sigma2}.  The
    inner average over n_starts points per word has sampling variance
    (1 - |c|^2) / n_starts, which would bias |c|^2 upward, so that
    plug-in term is subtracted per word.

    Args:
        n_words: outer Monte Carlo size (independent words).
        n_starts: inner points per word (shared word).
    """
    if n_words < 2 or n_starts < 2:
        raise ValueError("need at least 2 words and 2 starts")
    base = CounterStream(seed)
    starts = base.child(_TAG_STARTS)
    symbols = base.child(_TAG_SYMBOLS)
    x1, x2 = _uniform_starts(starts, n_words * n_starts, (n_words, n_starts))

    def symbols_at(step: int) -> np.ndarray:
        u = symbols.uniform_block(step * n_words, n_words)
        return (u < wp)[:, None]

    s = _run_birkhoff(gens, f, x1, x2, n_steps, symbols_at)[n_steps]
    s /= math.sqrt(n_steps)
    inner = np.exp(1j * lambda_ * s).mean(axis=1)
    mod2 = np.abs(inner) ** 2
    debiased = mod2 - (1.0 - mod2) / n_starts
    value = float(debiased.mean())
    stderr = float(np.std(debiased, ddof=1) / math.sqrt(n_words))
    return PairedMomentEstimate(value=value, stderr=stderr,
                                n_words=n_words, n_starts=n_starts)


def mann_kendall_z(values: Sequence[float]) -> float:
    """Mann-Kendall trend statistic, normal-approximated with continuity
    correction; positive z indicates an increasing trend."""
    n = len(values)
    if n < 3:
        raise ValueError(f"need at least 3 values, got {n}")
    s = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            d = values[j] - values[i]
            s += (d > 0) - (d < 0)
    var = n * (n - 1) * (2 * n + 5) / 18.0
    if s > 0:
        return (s - 1) / math.sqrt(var)
    if s < 0:
        return (s + 1) / math.sqrt(var)
    return 0.0


def no_increasing_trend(values: Sequence[float],
                        z_critical: float = 1.6448536269514722) -> bool:
    """One-sided Mann-Kendall test at 95%: True when no increasing trend."""
    return mann_kendall_z(values) <= z_critical
