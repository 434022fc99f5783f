"""Deterministic sub-seed derivation.

A sub-seed is the first 64 bits of ``numpy.random.SeedSequence`` state for
entropy ``master`` and spawn key ``keys``; string keys are hashed to
integers with CRC-32 so they are stable across processes.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    k = int(k)
    if k < 0:
        raise ValueError("seed keys must be nonnegative")
    return k


def derive_seed(master: int, *keys) -> int:
    ss = np.random.SeedSequence(entropy=int(master) & ((1 << 64) - 1),
                                spawn_key=tuple(_key(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & ((1 << 64) - 1)))
