"""Deterministic, order-independent random substreams for experiments.

Every Monte Carlo trial draws from a generator derived from the master seed
and a value-based key (e.g. SNR point, survivor budget, trial index), so the
same record is produced no matter how points are batched, filtered for
resumption, or distributed over workers.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(master_seed: int, *key) -> np.random.Generator:
    """Generator for (master_seed, key). Keys are hashed by value, not position
    in any schedule, so dropping or reordering other points never shifts this
    stream."""
    tag = ":".join(str(part) for part in key).encode()
    digest = hashlib.sha256(tag).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF, *words]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def as_generator(rng) -> np.random.Generator:
    """Accept either a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
