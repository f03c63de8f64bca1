"""Reproducible random streams.

Every environment replica gets its own Philox (counter-based) generator whose
key is a hash of ``(master_seed, model, replica_index)``. Replicas can be
generated in any order, on any number of workers, and still draw identical
numbers.
"""
from __future__ import annotations

import hashlib
import struct

import numpy as np

MASK64 = (1 << 64) - 1


def stream_key(master_seed: int, model: str, replica: int) -> int:
    """64-bit key derived from the stream coordinates (blake2b, little endian)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", int(master_seed) & MASK64))
    h.update(model.encode("utf-8"))
    h.update(struct.pack("<q", int(replica)))
    return int.from_bytes(h.digest(), "little")


def make_rng(master_seed: int, model: str = "", replica: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, model, replica)))


def philox(seed: int) -> np.random.Generator:
    """Generator keyed directly by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))
