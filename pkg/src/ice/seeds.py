"""Deterministic seed derivation and RNG construction.

All randomness flows through numpy's Philox bit generator, which is
counter-based and produces identical streams for identical seeds on every
platform. Stage/worker streams are derived from the campaign master seed by
hashing ``master || label || index`` with SHA-256, so distinct labels or
indices get independent streams with overwhelming probability.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, label: str, index: int = 0) -> int:
    """Collision-resistant 64-bit seed for the (label, index) sub-stream."""
    payload = f"{master}\x1f{label}\x1f{index}".encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))
