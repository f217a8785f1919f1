"""Portable random streams: SplitMix64 seeding, xoshiro256** core, Box-Muller normals.

Every phenotype in the system is a deterministic function of 64-bit seeds, so
the generator here is fully specified rather than borrowed from numpy (whose
``Generator.normal`` output is not guaranteed stable across releases).

A scalar pure-Python path and a numba-compiled bulk path produce the same
bits; the scalar path is the reference.
"""

from __future__ import annotations

import math
from typing import Iterable

import numba
import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_TWO_PI = 2.0 * math.pi
_INV_2_53 = 1.0 / 9007199254740992.0

# Substream purpose tags; label order is (layer, tensor, purpose).
PURPOSE_FACTOR_U = 0  # also the direct weight
PURPOSE_FACTOR_V = 1
PURPOSE_BIAS = 2


def mix64(z: int) -> int:
    """SplitMix64 output finalizer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state; returns ``(new_state, output)``."""
    state = (state + GOLDEN) & MASK64
    return state, mix64(state)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class NoiseStream:
    """A single-owner xoshiro256** stream.

    Not thread-safe by design: each consumer derives its own stream.
    """

    __slots__ = ("state", "origin")

    def __init__(self, seed: int):
        self.origin = seed & MASK64
        s = self.origin
        words = []
        for _ in range(4):
            s, out = splitmix64(s)
            words.append(out)
        if not any(words):  # all-zero state is a fixed point
            words[0] = GOLDEN
        self.state = words

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.state
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.state = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * _INV_2_53

    def randbelow(self, n: int) -> int:
        """Integer in [0, n) via multiply-high (bias < n / 2**64)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_u64() * n) >> 64

    def standard_normal(self) -> float:
        # u1 in (0, 1] so the log is always finite
        u1 = ((self.next_u64() >> 11) + 1) * _INV_2_53
        u2 = (self.next_u64() >> 11) * _INV_2_53
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)

    def normals(self, n: int) -> np.ndarray:
        """Next ``n`` standard normals as float64; same bits as ``n`` scalar calls."""
        state = np.array(self.state, dtype=np.uint64)
        out = np.empty(n, dtype=np.float64)
        _fill_normals(state, out)
        self.state = [int(w) for w in state]
        return out

    def copy(self) -> "NoiseStream":
        other = NoiseStream.__new__(NoiseStream)
        other.origin = self.origin
        other.state = list(self.state)
        return other


def derive_key(root: int, labels: Iterable[int] = ()) -> int:
    """Fold ``labels`` into ``root`` by iterated SplitMix64 mixing."""
    key = root & MASK64
    for label in labels:
        key = mix64(key ^ mix64((label + GOLDEN) & MASK64))
    return key


def derive_substream(root: int, labels: Iterable[int] = ()) -> NoiseStream:
    """Stream for ``(root, labels)``; with no labels this is ``NoiseStream(root)``."""
    return NoiseStream(derive_key(root, labels))


def gaussian(root: int, labels: Iterable[int], shape, std: float) -> np.ndarray:
    """float32 array of N(0, std^2) draws from the substream at ``(root, labels)``."""
    n = int(np.prod(shape)) if shape else 1
    z = derive_substream(root, labels).normals(n)
    return (z * std).astype(np.float32).reshape(shape)


# -- numba bulk path ---------------------------------------------------------

_U5 = np.uint64(5)
_U7 = np.uint64(7)
_U9 = np.uint64(9)
_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U45 = np.uint64(45)
_U57 = np.uint64(57)
_U19 = np.uint64(19)
_U1 = np.uint64(1)


@numba.njit(cache=True)
def _next(s):
    s1x5 = s[1] * _U5
    result = ((s1x5 << _U7) | (s1x5 >> _U57)) * _U9
    t = s[1] << _U17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = (s[3] << _U45) | (s[3] >> _U19)
    return result


@numba.njit(cache=True)
def _fill_normals(s, out):
    two_pi = 2.0 * np.pi
    inv = 1.0 / 9007199254740992.0
    for i in range(out.shape[0]):
        a = _next(s)
        b = _next(s)
        u1 = (float(a >> _U11) + 1.0) * inv
        u2 = float(b >> _U11) * inv
        out[i] = np.sqrt(-2.0 * np.log(u1)) * np.cos(two_pi * u2)
