"""xoshiro256** with splitmix64 seeding; bit-identical to the compiled kernels."""

from __future__ import annotations

import math

import numpy as np

MASK = 0xFFFFFFFFFFFFFFFF
INV_2_53 = 1.0 / 9007199254740992.0
# 1 - exp(-queue_max/scale) with scale = queue_max / 2
TRUNC_C = 1.0 - math.exp(-2.0)


def splitmix64(x: int) -> tuple[int, int]:
    x = (x + 0x9E3779B97F4A7C15) & MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return x, z ^ (z >> 31)


def seed_state(seed: int) -> np.ndarray:
    x = seed & MASK
    out = []
    for _ in range(4):
        x, z = splitmix64(x)
        out.append(z)
    return np.array(out, dtype=np.uint64)


def mix_seed(*parts: int) -> int:
    """Stable 64-bit mix of integers (for trial seeds)."""
    h = 0x243F6A8885A308D3
    for p in parts:
        h, z = splitmix64((h ^ (int(p) & MASK)) & MASK)
        h = z
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK


class Xoshiro:
    """Python-side generator operating on a 4-word state (mutated in place)."""

    __slots__ = ("s", "arr")

    def __init__(self, state: np.ndarray):
        self.arr = state
        self.s = [int(v) for v in state]

    def next(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK, 7) * 9) & MASK
        t = (s[1] << 17) & MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        return (self.next() >> 11) * INV_2_53

    def delay(self, fixed: float, qmax: float) -> float:
        if qmax > 0.0:
            return fixed - 0.5 * qmax * math.log(1.0 - self.uniform() * TRUNC_C)
        return fixed

    def lost(self, p: float) -> bool:
        if p > 0.0:
            return self.uniform() < p
        return False

    def skew(self, bound: float) -> float:
        if bound > 0.0:
            return (self.uniform() - 0.5) * bound
        return 0.0

    def save(self) -> None:
        for i in range(4):
            self.arr[i] = self.s[i]
