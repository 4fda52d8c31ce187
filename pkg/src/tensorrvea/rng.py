"""Counter-based random stream.

Draw ``i`` of a stream with seed ``s`` is a pure function of ``(s, i)``::

    key   = mix64(s mod 2**64)
    z     = (key + (i + 1) * 0x9E3779B97F4A7C15) mod 2**64
    u_i   = (mix64(z) >> 11) * 2**-53           # in [0, 1)

where ``mix64`` is the SplitMix64 finalizer. The stream keeps a counter and
advancing it is the only state change, so any draw can be replayed from a
recorded ``(seed, counter)``.

Consumption order is fixed per operator (see :mod:`tensorrvea.operators`):
SBX draws ``M_c``, ``R1``, ``R2`` (``n//2 x d`` each) then ``R3`` (``n//2 x 1``);
polynomial mutation draws ``R4`` then ``M_mut`` (``n x d`` each).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_SCALE = 2.0**-53


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class RngStream:
    """Deterministic uniform stream addressed by a 64-bit counter."""

    __slots__ = ("seed", "counter", "_key")

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed)
        self.counter = int(counter)
        self._key = mix64(self.seed & MASK64)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, counter={self.counter})"

    def copy(self) -> "RngStream":
        return RngStream(self.seed, self.counter)

    def spawn(self, key: int) -> "RngStream":
        """Independent child stream, e.g. one per repetition."""
        return RngStream(mix64(self._key ^ mix64(int(key) & MASK64)))

    def block(self, start: int, count: int) -> np.ndarray:
        """Draws ``start .. start+count-1`` without touching the counter."""
        with np.errstate(over="ignore"):
            c = np.arange(count, dtype=np.uint64) + np.uint64(start + 1)
            z = np.uint64(self._key) + c * np.uint64(GOLDEN)
            bits = _mix64_array(z) >> np.uint64(11)
        return bits.astype(np.float64) * _SCALE

    def uniform(self, rows: int, cols: int) -> np.ndarray:
        if rows < 1 or cols < 1:
            raise ValueError(f"uniform block needs rows, cols >= 1, got {rows}x{cols}")
        out = self.block(self.counter, rows * cols).reshape(rows, cols)
        self.counter += rows * cols
        return out

    def draw_at(self, i: int) -> float:
        """Scalar reference path for draw ``i`` (pure Python integers)."""
        z = (self._key + (i + 1) * GOLDEN) & MASK64
        return (mix64(z) >> 11) * _SCALE

    def next_float(self) -> float:
        u = self.draw_at(self.counter)
        self.counter += 1
        return u


def uniform_tensor(stream: RngStream, rows: int, cols: int) -> np.ndarray:
    return stream.uniform(rows, cols)


def shuffle_indices(stream: RngStream, n: int) -> np.ndarray:
    """Fisher-Yates permutation of ``range(n)`` consuming exactly ``n - 1`` draws."""
    if n < 1:
        raise ValueError("shuffle needs n >= 1")
    perm = list(range(n))
    if n == 1:
        return np.array(perm, dtype=np.int64)
    draws = stream.uniform(1, n - 1)[0].tolist()
    for k, i in enumerate(range(n - 1, 0, -1)):
        j = int(draws[k] * (i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return np.array(perm, dtype=np.int64)
