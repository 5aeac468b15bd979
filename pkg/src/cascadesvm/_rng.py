"""Portable seeded randomness for shuffling and partitioning.

Every random decision in the package goes through :class:`Xoshiro256`
(xoshiro256** 1.0, Blackman & Vigna 2018), seeded by expanding a 64-bit
integer seed with SplitMix64.  Both algorithms are defined on unsigned 64-bit
arithmetic only, so a seed reproduces the same permutation on any platform and
in any language that follows the published reference code.
"""

from __future__ import annotations

from typing import List, MutableSequence, TypeVar

_MASK = (1 << 64) - 1
T = TypeVar("T")


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class SplitMix64:
    """SplitMix64 (Steele, Lea & Flood); used only for seed expansion."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)


class Xoshiro256:
    """xoshiro256** generator.

    ``Xoshiro256(seed)`` fills the 256-bit state with four consecutive
    SplitMix64 outputs of ``seed``.  ``Xoshiro256.from_state`` sets the state
    words directly (used for reference test vectors).
    """

    def __init__(self, seed: int = 0):
        sm = SplitMix64(seed)
        self.s = [sm.next() for _ in range(4)]

    @classmethod
    def from_state(cls, s0: int, s1: int, s2: int, s3: int) -> "Xoshiro256":
        rng = cls.__new__(cls)
        rng.s = [s0 & _MASK, s1 & _MASK, s2 & _MASK, s3 & _MASK]
        if not any(rng.s):
            raise ValueError("xoshiro256** state must not be all zero")
        return rng

    def next(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = ((1 << 64) // n) * n
        while True:
            x = self.next()
            if x < limit:
                return x % n

    def shuffle(self, items: MutableSequence[T]) -> None:
        """In-place Fisher-Yates (Durstenfeld) shuffle, high index first."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> List[int]:
        perm = list(range(n))
        self.shuffle(perm)
        return perm


def stream(seed: int, index: int = 0) -> Xoshiro256:
    """Generator for sub-stream ``index`` of ``seed`` (seed + index, re-expanded)."""
    return Xoshiro256((seed + index) & _MASK)
