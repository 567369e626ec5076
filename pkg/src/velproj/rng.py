"""Deterministic 64-bit PRNG for reproducible instance generation.

The stream is counter-based: output i is mix64(seed + (i+1) * GOLDEN) where
mix64 is the splitmix finalizer

    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

with all arithmetic modulo 2**64.  Uniforms take the top 53 bits,
``u = ((z >> 11) + 1) * 2**-53`` in (0, 1]; normals come from Box-Muller
pairs ``sqrt(-2 ln u1) * (cos, sin)(2 pi u2)`` consumed in stream order.
This pins generated instances bit-for-bit to the seed.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-based splitmix stream with a fixed 64-bit seed."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed % (1 << 64))
        self._count = 0

    def raw(self, count: int) -> np.ndarray:
        """Next ``count`` raw 64-bit outputs."""
        idx = np.arange(self._count + 1, self._count + count + 1, dtype=np.uint64)
        self._count += count
        with np.errstate(over="ignore"):
            return _mix64(self._seed + idx * GOLDEN)

    def uniform(self, count: int) -> np.ndarray:
        """Uniform doubles in (0, 1]."""
        return ((self.raw(count) >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53

    def normal(self, count: int) -> np.ndarray:
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs)
        radius = np.sqrt(-2.0 * np.log(u[0::2]))
        angle = 2.0 * np.pi * (u[1::2] - 2.0**-53)  # back to [0, 1)
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:count]

    def integers(self, bound: int, count: int) -> np.ndarray:
        """Integers in [0, bound) by modular reduction of raw outputs."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self.raw(count) % np.uint64(bound)).astype(np.int64)

    def distinct_integers(self, count: int, bound: int) -> np.ndarray:
        """First ``count`` distinct values of the integer stream, in draw order."""
        if count > bound:
            raise ValueError("cannot draw more distinct values than the bound")
        seen: list[int] = []
        chosen = set()
        while len(seen) < count:
            for value in self.integers(bound, max(count, 16)):
                if int(value) not in chosen:
                    chosen.add(int(value))
                    seen.append(int(value))
                    if len(seen) == count:
                        break
        return np.array(seen, dtype=np.int64)
