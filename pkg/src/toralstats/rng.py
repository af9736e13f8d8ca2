"""Reproducible counter-based random streams.

All randomness in this package flows through SplitMix64-style counter
streams so that every sampled quantity is a pure function of a 64-bit
seed, independent of evaluation order, chunking, or platform.  The
algorithm, fully pinned down (all arithmetic mod 2**64):

    GOLDEN = 0x9E3779B97F4A7C15
    mix64(z):
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)

    output(seed, i)   = mix64(seed + (i + 1) * GOLDEN)       # i-th 64-bit word
    uniform(seed, i)  = (output(seed, i) >> 11) * 2**-53     # in [0, 1)
    child(seed, tag)  = seed ^ mix64((tag + 1) * GOLDEN)

Streams are splittable: child(seed, tag) opens an independent substream,
so parallel consumers (word symbols, initial points, per-replica seeds)
never share counters.  The scalar and vectorized paths compute the same
words bit for bit.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 2.0**-53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on Python integers (mod 2**64)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _U_MIX1
    z = (z ^ (z >> _S27)) * _U_MIX2
    return z ^ (z >> _S31)


class CounterStream:
    """Stateless indexed stream of 64-bit words derived from one seed."""

    __slots__ = ("seed",)

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64

    def child(self, tag: int) -> CounterStream:
        """Independent substream; documented derivation, safe to nest."""
        return CounterStream(self.seed ^ mix64(((tag + 1) * GOLDEN) & MASK64))

    def u64(self, index: int) -> int:
        """Single 64-bit output word at the given counter index."""
        return mix64((self.seed + (index + 1) * GOLDEN) & MASK64)

    def uniform(self, index: int) -> float:
        return (self.u64(index) >> 11) * _INV53

    def u64_block(self, start: int, count: int) -> np.ndarray:
        """Vectorized output words for counter indices start .. start+count-1."""
        idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
        base = np.uint64(self.seed) + idx * _U_GOLDEN
        return _mix64_vec(base)

    def uniform_block(self, start: int, count: int) -> np.ndarray:
        return (self.u64_block(start, count) >> _S11).astype(np.float64) * _INV53
