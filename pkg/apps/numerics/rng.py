"""
Seedable SplitMix64 generator.

Same seed, same stream, on every platform: the update is pure 64-bit integer
arithmetic, and floats are derived from the top 53 bits. Blocks of outputs
are computed with numpy uint64 arrays (wrapping arithmetic), which yields
exactly the sequence of repeated scalar updates.

Usage:
    from apps.numerics.rng import Rng

    rng = Rng(7)
    rng.next_u64()
    rng.normal((4, 8), std=0.02)
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 output function on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over='ignore'):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """SplitMix64 stream with numpy-shaped draws."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def __repr__(self) -> str:
        return f'Rng(state=0x{self.state:016x})'

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def u64_array(self, count: int) -> np.ndarray:
        """The next `count` outputs as a uint64 array."""
        if count <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, count + 1, dtype=np.uint64)
        with np.errstate(over='ignore'):
            states = np.uint64(self.state) + steps * np.uint64(GOLDEN)
        self.state = (self.state + count * GOLDEN) & MASK64
        return _mix_array(states)

    def uniform(self, shape=(), low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Floats in [low, high) built from the top 53 bits of each output."""
        count = int(np.prod(shape, dtype=np.int64))
        bits = self.u64_array(count) >> np.uint64(11)
        unit = bits.astype(np.float64) * (1.0 / (1 << 53))
        return (low + (high - low) * unit).reshape(shape)

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        """Integers in [low, high)."""
        span = high - low
        if span <= 0:
            raise ValueError(f'empty integer range [{low}, {high})')
        values = np.floor(self.uniform(shape) * span).astype(np.int64) + low
        return np.minimum(values, high - 1)

    def normal(self, shape=(), std: float = 1.0) -> np.ndarray:
        """Gaussian samples via Box-Muller, consuming two uniforms per pair."""
        count = int(np.prod(shape, dtype=np.int64))
        pairs = (count + 1) // 2
        u = self.uniform((pairs, 2))
        radius = np.sqrt(-2.0 * np.log(1.0 - u[:, 0]))
        angle = 2.0 * math.pi * u[:, 1]
        z = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1).reshape(-1)
        return (std * z[:count]).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """A uniformly random ordering of range(n)."""
        return np.argsort(self.uniform((n,)), kind='stable')

    def derive(self, key: int) -> 'Rng':
        """An independent child stream; does not advance this one."""
        return Rng(mix64(self.state ^ mix64((int(key) * GOLDEN) & MASK64)))
