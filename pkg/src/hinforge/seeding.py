"""Named random sub-streams derived from one root seed."""

import hashlib
import zlib

import numpy as np


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for ``(seed, name, *extra)``."""
    key = [int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))] + [int(e) for e in extra]
    return np.random.default_rng(np.random.SeedSequence(key))


def unit_hash(seed: int, tag: str, node_id: int) -> float:
    """Deterministic uniform in [0, 1) from ``(seed, tag, node_id)`` alone."""
    h = hashlib.blake2b(f"{seed}:{tag}:{node_id}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "big") / 2.0**64
