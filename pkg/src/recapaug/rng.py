"""Deterministic random-stream derivation.

Every stochastic choice in the pipeline draws from a generator derived
here, so results are a pure function of (seed, epoch, record index, ...)
and never depend on worker scheduling or process-level hash state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _encode(parts: tuple) -> bytes:
    chunks = []
    for part in parts:
        if isinstance(part, (bool, int, np.integer)):
            chunks.append(b"i" + str(int(part)).encode())
        elif isinstance(part, str):
            chunks.append(b"s" + part.encode("utf-8"))
        elif isinstance(part, bytes):
            chunks.append(b"b" + part)
        else:
            raise TypeError(f"unhashable rng component: {part!r}")
    return b"\x1f".join(chunks)


def stable_hash64(*parts) -> int:
    """64-bit hash of the parts, stable across runs and platforms."""
    digest = hashlib.blake2b(_encode(parts), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def derive_rng(*parts) -> np.random.Generator:
    """Generator seeded from a stable hash of the parts."""
    digest = hashlib.blake2b(_encode(parts), digest_size=32).digest()
    words = [int.from_bytes(digest[i : i + 4], "big") for i in range(0, 32, 4)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))
