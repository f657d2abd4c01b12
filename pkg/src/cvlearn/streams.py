"""Deterministic random streams.

Every random draw in the package descends from one master seed.  Child
streams are addressed by a tuple key, ``SeedSequence(entropy=seed,
spawn_key=key)``, so a stream's content depends only on ``(seed, key)`` and
never on how work is scheduled across threads.
"""

import secrets

import numpy as np

# Leading element of every spawn key; keeps the sub-spaces of different
# subsystems disjoint.
SIMULATE = 1
PILOTS = 2
RESAMPLE = 3
DEAL = 4
SWEEP = 5
TRACE = 6


def fresh_seed():
    """Draw a master seed from OS entropy (only used when none was given)."""
    return secrets.randbits(63)


def seed_sequence(seed, *key):
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key)
        )
    if isinstance(seed, np.random.Generator):
        # Consumes one draw from the caller's generator; deterministic given
        # the generator state.
        seed = int(seed.integers(0, 2**63))
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def child_rng(seed, *key):
    """Generator for the stream ``key`` below master ``seed``."""
    return np.random.default_rng(seed_sequence(seed, *key))
