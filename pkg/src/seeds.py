"""
Reproducible seeding.

derive_seed mixes (master seed, stream label, index) into a 64-bit seed
with splitmix64 finalizers; stream_rng turns a seed and a purpose name into
an independent counter-based Philox generator.

Philox is counter-based: the first k draws of a stream never depend on how
many values are drawn later. Coupled refinement and grid-stable Brownian
increments rely on this.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def label_hash(label: str) -> int:
    """Stable 64-bit hash of a stream label (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(master: int, stream: str, index: int = 0) -> int:
    """
    Child seed for (master, stream, index).

    For a fixed (master, stream) the map index -> seed is a bijection on
    64-bit integers, so distinct indices never collide.
    """
    if index < 0:
        raise ValueError(f"index must be non-negative, got {index}")
    inner = _splitmix64((master & MASK64) ^ label_hash(stream))
    return _splitmix64(inner ^ (index & MASK64))


def stream_rng(seed: int, purpose: str) -> np.random.Generator:
    """Philox generator for one purpose ("gaps", "brownian", ...) of a seed."""
    ss = np.random.SeedSequence(seed & MASK64, spawn_key=(label_hash(purpose) & 0xFFFFFFFF,))
    return np.random.Generator(np.random.Philox(ss))
