"""Seeded, splittable random streams.

A stream is keyed by ``(seed, *key)``; the same key always yields the same
numbers, so replicate ``r`` can be generated in any order or thread.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_part(k) -> int:
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("stream keys must be non-negative")
        return int(k)
    return zlib.crc32(str(k).encode("utf-8"))


def stream(seed: int, *key) -> np.random.Generator:
    """Independent PCG64 generator for sub-stream ``key`` of master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_part(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
