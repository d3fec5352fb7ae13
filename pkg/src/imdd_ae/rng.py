"""Message-source generators: 32-bit Mersenne Twister and taus88.

Training data and test data come from different generator families so that
a trained model cannot latch onto the pseudo-random structure of its own
training stream. Both generators are implemented here directly and mapped
to uniform symbols by rejection sampling.
"""

from __future__ import annotations

import numpy as np

_U32 = 0xFFFFFFFF


def splitmix64(x: int) -> int:
    """One splitmix64 scramble step (used only to derive sub-stream seeds)."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Deterministic 32-bit sub-seed for a (master, path...) address."""
    x = master & 0xFFFFFFFFFFFFFFFF
    for p in path:
        x = splitmix64(x ^ ((p + 1) * 0x9E3779B97F4A7C15 & 0xFFFFFFFFFFFFFFFF))
    return x & _U32


class Mt19937:
    """Standard 32-bit Mersenne Twister (mt19937ar seeding and tempering)."""

    N = 624
    M = 397
    MATRIX_A = np.uint32(0x9908B0DF)
    UPPER = np.uint32(0x80000000)
    LOWER = np.uint32(0x7FFFFFFF)

    def __init__(self, seed: int):
        mt = np.zeros(self.N, dtype=np.uint64)
        mt[0] = seed & _U32
        for i in range(1, self.N):
            prev = int(mt[i - 1])
            mt[i] = (1812433253 * (prev ^ (prev >> 30)) + i) & _U32
        self._mt = mt.astype(np.uint32)
        self._idx = self.N  # forces a twist before the first draw

    def _twist(self):
        mt = self._mt
        nxt = np.empty_like(mt)
        y = (mt & self.UPPER) | (np.roll(mt, -1) & self.LOWER)
        mag = (y & np.uint32(1)) * self.MATRIX_A
        shifted = (y >> np.uint32(1)) ^ mag
        # Three passes resolve the in-place dependency chain of the
        # reference implementation on old/new state words.
        nxt[:227] = mt[397:] ^ shifted[:227]
        nxt[227:454] = nxt[:227] ^ shifted[227:454]
        nxt[454:623] = nxt[227:396] ^ shifted[454:623]
        y_last = (mt[623] & self.UPPER) | (nxt[0] & self.LOWER)
        nxt[623] = nxt[396] ^ (y_last >> np.uint32(1)) ^ (
            (y_last & np.uint32(1)) * self.MATRIX_A
        )
        self._mt = nxt
        self._idx = 0

    def words(self, k: int) -> np.ndarray:
        """Next k tempered 32-bit outputs as uint32."""
        out = np.empty(k, dtype=np.uint32)
        filled = 0
        while filled < k:
            if self._idx >= self.N:
                self._twist()
            take = min(k - filled, self.N - self._idx)
            y = self._mt[self._idx : self._idx + take].copy()
            y ^= y >> np.uint32(11)
            y ^= (y << np.uint32(7)) & np.uint32(0x9D2C5680)
            y ^= (y << np.uint32(15)) & np.uint32(0xEFC60000)
            y ^= y >> np.uint32(18)
            out[filled : filled + take] = y
            self._idx += take
            filled += take
        return out

    def next_u32(self) -> int:
        return int(self.words(1)[0])


class Taus88:
    """Combined three-component Tausworthe generator (taus88 parameters)."""

    _MINS = (2, 8, 16)  # component states must avoid low fixed points

    def __init__(self, seed: int):
        states = []
        x = seed
        for lo in self._MINS:
            x = splitmix64(x)
            s = x & _U32
            if s < lo:
                s += lo
            states.append(s)
        self._s1, self._s2, self._s3 = states

    def next_u32(self) -> int:
        s1, s2, s3 = self._s1, self._s2, self._s3
        b = (((s1 << 13) & _U32) ^ s1) >> 19
        s1 = (((s1 & 0xFFFFFFFE) << 12) & _U32) ^ b
        b = (((s2 << 2) & _U32) ^ s2) >> 25
        s2 = (((s2 & 0xFFFFFFF8) << 4) & _U32) ^ b
        b = (((s3 << 3) & _U32) ^ s3) >> 11
        s3 = (((s3 & 0xFFFFFFF0) << 17) & _U32) ^ b
        self._s1, self._s2, self._s3 = s1, s2, s3
        return s1 ^ s2 ^ s3

    def words(self, k: int) -> np.ndarray:
        return np.fromiter((self.next_u32() for _ in range(k)),
                           dtype=np.uint32, count=k)


GENERATORS = {"mersenne": Mt19937, "tausworthe": Taus88}


class MessageStream:
    """Uniform messages in {1..M} drawn from a word generator by rejection."""

    def __init__(self, kind: str, seed: int, M: int):
        if kind not in GENERATORS:
            raise ValueError(f"unknown generator kind {kind!r}")
        self.kind = kind
        self.M = M
        self._gen = GENERATORS[kind](seed)
        self._limit = (2**32 // M) * M

    def draw(self, k: int) -> np.ndarray:
        """Next k messages as int64 in {1..M}."""
        out = np.empty(k, dtype=np.int64)
        filled = 0
        while filled < k:
            w = self._gen.words(max(k - filled, 16))
            w = w[w < self._limit][: k - filled]
            out[filled : filled + w.size] = (w % self.M) + 1
            filled += w.size
        return out

    def draw_bits(self, k: int) -> np.ndarray:
        """Next k uniform bits (unpacked 32 per word, LSB first)."""
        n_words = (k + 31) // 32
        w = self._gen.words(n_words)
        bits = (w[:, None] >> np.arange(32, dtype=np.uint32)) & np.uint32(1)
        return bits.reshape(-1)[:k].astype(np.int64)
