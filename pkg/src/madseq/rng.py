"""Deterministic uniform streams for predictive resampling.

Trajectory draws must be reproducible bit-for-bit across runs, thread counts
and language ports, so the generator is pinned down to the integer: a
SplitMix64 derivation expands (master seed, stream index) into the state of a
xoshiro256** generator, and each trajectory step consumes exactly one
uniform.

Stream contract
---------------
Let ``PHI = 0x9E3779B97F4A7C15`` (the 64-bit golden-ratio increment) and let
``splitmix64`` denote the standard generator: state advances by PHI, output is
the mix ``z ^= z>>30, z*=0xBF58476D1CE4E5B9, z ^= z>>27, z*=0x94D049BB133111EB,
z ^= z>>31`` of the advanced state. All arithmetic is mod 2**64.

* stream key:   ``key = seed XOR ((index + 1) * PHI  mod 2**64)``
* stream state: the first four splitmix64 outputs starting from state ``key``
  become (s0, s1, s2, s3) of xoshiro256**; an all-zero result is replaced by
  (PHI, 0, 0, 0).
* uniform:      ``(next_u64() >> 11) * 2.0**-53`` in [0, 1).

`madseq.engine` re-implements the same recipe inside numba; test_rng.py holds
frozen known-answer vectors that both implementations must reproduce.
"""
from __future__ import annotations

import numpy as np

_M64 = (1 << 64) - 1
PHI = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns (advanced state, output)."""
    state = (state + PHI) & _M64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _M64
    z = ((z ^ (z >> 27)) * _MIX2) & _M64
    return state, z ^ (z >> 31)


def stream_state(seed: int, index: int) -> tuple[int, int, int, int]:
    """xoshiro256** state for stream `index` under master `seed`."""
    key = (seed & _M64) ^ (((index + 1) * PHI) & _M64)
    s = []
    for _ in range(4):
        key, out = _splitmix64(key)
        s.append(out)
    if s[0] == 0 and s[1] == 0 and s[2] == 0 and s[3] == 0:
        s[0] = PHI
    return s[0], s[1], s[2], s[3]


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _M64


class UniformStream:
    """Pure-Python xoshiro256** stream; reference for the numba engine."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int, index: int = 0):
        self.s0, self.s1, self.s2, self.s3 = stream_state(seed, index)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s1 * 5) & _M64, 7) * 9) & _M64
        t = (s1 << 17) & _M64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniforms(self, count: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(count)])


def derive_seed(seed: int, *indices: int) -> int:
    """Fold sub-indices into a 64-bit sub-seed (replicates, methods, ...).

    Not part of the cross-language resampling contract; used wherever a
    deterministic child seed is needed (bench replicates, permutation draws).
    """
    state = seed & _M64
    for ix in indices:
        state ^= ((ix + 1) * PHI) & _M64
        state, out = _splitmix64(state)
        state = out
    return state


def random_permutation(size: int, seed: int, index: int) -> np.ndarray:
    """Fisher-Yates permutation of range(size) from stream (seed, index)."""
    stream = UniformStream(seed, index)
    perm = np.arange(size, dtype=np.int64)
    for i in range(size - 1, 0, -1):
        j = int(stream.uniform() * (i + 1))
        if j > i:
            j = i
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def sample_index(probs: np.ndarray, u: float, total: float | None = None) -> int:
    """Inverse-CDF draw over flat index order with one uniform variate.

    Scans the raw masses against ``u * total`` so callers tracking an
    unnormalized running total get identical trajectories to normalized ones.
    Returns the smallest index with cumulative mass strictly above the
    threshold; falls back to the last index if rounding pushes the threshold
    past the accumulated total.
    """
    if total is None:
        total = float(np.sum(probs))
    threshold = u * total
    acc = 0.0
    last = probs.shape[0] - 1
    for i in range(last):
        acc += probs[i]
        if acc > threshold:
            return i
    return last
