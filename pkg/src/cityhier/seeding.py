"""Deterministic RNG substreams.

A master seed plus a structured key (stream name, parameters, replicate
index) maps to an independent numpy Generator. Derivation depends only on
the key, never on call order, so replicate work can be farmed out to any
number of workers without changing results.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK = (1 << 63) - 1


def _key_int(part) -> int:
    if isinstance(part, (bool, float)):
        raise TypeError(f"seed key parts must be int or str, got {part!r}")
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"seed key parts must be int or str, got {part!r}")


def substream(master_seed: int, *key) -> np.random.Generator:
    """Independent generator for (master_seed, *key).

    Key parts may be ints or short strings; strings are folded through
    CRC-32 so the derivation is stable across processes and platforms.
    """
    entropy = [_key_int(master_seed)] + [_key_int(p) for p in key]
    return np.random.default_rng(np.random.SeedSequence(entropy))
