"""Deterministic counter-based pseudo-random generator.

The generator is SplitMix64: draw ``k`` has value ``mix64(seed + k * GAMMA)``
where ``GAMMA = 0x9E3779B97F4A7C15`` and ``mix64`` is the standard
xor-shift/multiply finalizer.  Because each output depends only on the seed
and the draw index, whole blocks of draws vectorize as pure array
arithmetic, and any implementation of the same two constants and three
shift/multiply rounds reproduces the stream bit for bit.

Streams for independent purposes (weight init, regularizer draws, clock
draws, ...) are derived with :meth:`Rng.child`, which folds a textual tag
into the seed through the same mixer.
"""

from __future__ import annotations

import math

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = 0xFFFFFFFFFFFFFFFF

# 2**-53; also the value substituted when a 53-bit draw comes out zero so
# that uniforms stay strictly positive.
_U53 = 1.0 / 9007199254740992.0


def _mix64(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


class Rng:
    """SplitMix64 stream with an explicit draw counter."""

    def __init__(self, seed: int, _counter: int = 0):
        self._seed = np.uint64(seed & _MASK64)
        self._counter = _counter

    @property
    def seed(self) -> int:
        return int(self._seed)

    def child(self, tag: str) -> "Rng":
        """Independent stream derived from this stream's seed and ``tag``."""
        folded = np.uint64(_fnv1a64(tag))
        return Rng(int(_mix64(self._seed ^ folded)))

    def next_uint64(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix64(self._seed + idx * _GAMMA)

    def uniform(self, n: int) -> np.ndarray:
        """``n`` uniforms on (0, 1); the zero cell of the 53-bit grid is
        remapped to 2**-53 so draws are strictly positive."""
        bits = self.next_uint64(n) >> np.uint64(11)
        u = bits.astype(np.float64) * _U53
        u[u == 0.0] = _U53
        return u

    def exponential(self, rate: float | np.ndarray, n: int) -> np.ndarray:
        """Inverse-CDF exponential draws: ``-ln(U) / rate``."""
        return -np.log(self.uniform(n)) / rate

    def normal(self, n: int) -> np.ndarray:
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        m = (n + 1) // 2
        u1 = self.uniform(m)
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:n]

    def uniform_range(self, lo: float, hi: float, n: int) -> np.ndarray:
        return lo + (hi - lo) * self.uniform(n)

    def shuffle(self, values: np.ndarray) -> np.ndarray:
        """Fisher-Yates shuffle driven by this stream; returns a copy."""
        out = np.array(values)
        n = len(out)
        if n <= 1:
            return out
        draws = self.uniform(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(draws[n - 1 - i] * (i + 1))
            j = min(j, i)
            out[i], out[j] = out[j], out[i]
        return out
