"""Seedable random number generation for simulation runs.

The simulation kernels use xoshiro256++ seeded through splitmix64.  The same
algorithm is implemented twice: once here in pure Python (used by tests and
slow reference code) and once inside the jitted kernels.  Both consume the
stream in the same order, so a reference updater can reproduce a kernel run
bit for bit.

Stream splitting rule: every run derives its generator seed with
``derive_seed(base_seed, *integer_keys)``, where the keys identify the run
(e.g. a sweep cell uses ``(L, round(h * 1e6))``).  The derivation is a
splitmix64 finalizer chain, so distinct key tuples give independent streams.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """splitmix64 output finalizer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, *keys: int) -> int:
    """Derive an independent 64-bit stream seed from a base seed and keys."""
    x = int(base_seed) & MASK64
    if not keys:
        return _mix64(x + GOLDEN)
    for k in keys:
        x = (x + GOLDEN) & MASK64
        x = _mix64(x ^ (int(k) & MASK64))
    return x


def seed_state(seed: int) -> np.ndarray:
    """Expand a 64-bit seed into a xoshiro256 state vector (uint64[4])."""
    state = np.empty(4, dtype=np.uint64)
    x = int(seed) & MASK64
    for i in range(4):
        x = (x + GOLDEN) & MASK64
        state[i] = _mix64(x)
    if not state.any():  # all-zero state is a fixed point; unreachable via mix64
        state[0] = np.uint64(GOLDEN)
    return state


class Xoshiro256:
    """Pure-Python xoshiro256++, stream-compatible with the jitted kernels."""

    def __init__(self, seed: int):
        self.state = seed_state(seed)

    def next_u64(self) -> int:
        s = self.state
        s0, s1, s2, s3 = (int(v) for v in s)
        x = (s0 + s3) & MASK64
        result = (((x << 23) | (x >> 41)) + s0) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        s[0], s[1], s[2], s[3] = s0, s1, s2, s3
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return self.next_u64() % n
