"""Deterministic seed derivation.

All randomness in an experiment flows from one master seed. Sub-seeds are
derived by hashing component names (and integer indices) together with the
master seed, so adding a new consumer never shifts the streams of existing
ones.
"""

import zlib

import numpy as np


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def derive_seed(master, *parts):
    """Return a 64-bit seed derived from ``master`` and a path of names/indices."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, *(_key(p) for p in parts)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(master, *parts):
    return np.random.default_rng(derive_seed(master, *parts))
