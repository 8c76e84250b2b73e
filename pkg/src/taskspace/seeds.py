"""Named random streams derived from one master seed.

Every stochastic stage draws from its own substream so adding or reordering
stages never perturbs the randomness seen by the others.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_seed(master_seed: int, name: str) -> np.random.SeedSequence:
    """Derive the seed sequence for the named stream.

    The name is hashed with SHA-256 so the derivation is stable across runs,
    platforms, and Python hash randomization.
    """
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4)]
    return np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF, *words])


def named_rng(master_seed: int, name: str) -> np.random.Generator:
    """Generator for the named stream."""
    return np.random.default_rng(stream_seed(master_seed, name))
