"""SplitMix64 pseudo-random generator.

Every randomized operation in this package draws from this one generator so
that fixtures are reproducible bit-for-bit across machines and across the
pure/compiled kernel backends. The algorithm is the standard SplitMix64
mixer: a 64-bit counter advanced by the golden-ratio increment, passed
through two xor-multiply rounds.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# 2^-53, scales a 53-bit integer into [0, 1)
_INV53 = 1.0 / 9007199254740992.0


class SplitMix64:
    """Scalar SplitMix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state = (self.state + _GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)

    def next_unit(self):
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV53

    def next_below(self, n):
        """Integer in [0, n) via modulo reduction (bias is negligible for n << 2^64)."""
        if n <= 0:
            raise ValueError("next_below requires n >= 1")
        return self.next_u64() % n


def splitmix64_array(seed, count):
    """Vectorized stream: exactly the first `count` outputs of SplitMix64(seed).

    The i-th output (1-based) mixes state seed + i * GOLDEN, so the whole
    stream can be generated without a sequential loop. uint64 arithmetic in
    numpy wraps modulo 2^64, matching the scalar implementation.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(int(seed) & MASK64) + idx * np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def gaussian_array(seed, count, sigma):
    """`count` i.i.d. N(0, sigma^2) samples via Box-Muller on a SplitMix64 stream.

    Draw pairs (a, b) from the stream; u1/u2 map the top 53 bits into (0, 1)
    (offset by half an ulp so log never sees zero); only the cosine branch is
    kept, so each normal costs two uint64 draws.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    raw = splitmix64_array(seed, 2 * count)
    u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53
    u2 = ((raw[1::2] >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53
    return sigma * np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
