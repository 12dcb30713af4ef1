"""Keyed random substreams.

Every random consumer in a run (initial proposal, population draw, fold
split, EM seeding, final refit) gets its own generator derived from
``(seed, iteration, purpose, *extra)``. Adding a consumer therefore never
shifts the numbers another consumer sees.
"""

import zlib

import numpy as np

INIT = 0
POPULATION = 1
FOLDS = 2
CV_FIT = 3
FIT = 4


def substream(seed, t, purpose, *extra):
    """Return a ``Generator`` keyed by ``(seed, t, purpose, *extra)``."""
    key = (int(t), int(purpose)) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


def stable_hash(text):
    return zlib.crc32(text.encode("utf-8"))


def derive_seed(master_seed, *key):
    """Derive a 63-bit integer seed from a master seed and an integer key."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 31) ^ int(lo)
