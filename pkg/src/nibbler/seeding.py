"""Deterministic named seed streams.

Every run hangs off a single 64-bit master seed. Each randomness consumer
(observation permutation, per-board dynamics, agent weight init, exploration)
gets its own independent generator derived by hashing the master seed together
with a name path. Consuming draws in one stream never perturbs another, so the
behaviour of a component is reproducible independently of the order in which
other components use randomness.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *path: int | str) -> int:
    """Hash (master_seed, *path) to a 64-bit seed for an independent stream."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master_seed)).encode())
    for part in path:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "little")


def derive_rng(master_seed: int, *path: int | str) -> np.random.Generator:
    """A PCG64 generator seeded on the named stream."""
    return np.random.default_rng(derive_seed(master_seed, *path))
