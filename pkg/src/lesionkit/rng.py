"""Deterministic 64-bit random generator used for every seeded decision.

The generator family is SplitMix64. It is fixed here (and pinned by a
golden-vector test) so that split plans, fold assignments, shuffles and
augmentation draws reproduce bit-for-bit on any platform, independent of
Python's own `random` module or numpy's generator versioning.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 pseudo-random stream (Steele, Lea & Flood 2014)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def next_below(self, n: int) -> int:
        """Unbiased uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n


def derive_seed(*parts: object) -> int:
    """Collapse a tuple of labels (master seed, stage, class name, record id,
    epoch...) into a 64-bit sub-seed via SHA-256.

    Independent streams derived this way make results invariant to worker
    count and iteration order.
    """
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big")


def shuffled(items: list, rng: SplitMix64) -> list:
    """Fisher-Yates shuffle driven by a SplitMix64 stream; returns a new list."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.next_below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out
