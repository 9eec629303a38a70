"""Reproducible random streams.

Every stream is a numpy ``Generator`` over the counter-based Philox bit
generator. Replicate ``i`` of a batch seeded with ``base`` always uses the
child ``SeedSequence(base, spawn_key=(i,))``, which is the same stream that
``SeedSequence(base).spawn(n)[i]`` would hand out, so results never depend on
how replicates are scheduled across workers.
"""

from __future__ import annotations

import numpy as np



def replicate_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    """Seed sequence for replicate ``index`` of a batch seeded with ``base_seed``."""
    return np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))


def as_generator(seed) -> np.random.Generator:
    """Coerce an int, ``SeedSequence`` or ``Generator`` into a Philox generator.

    Generators are returned unchanged (and therefore advanced by the caller's
    use), everything else builds a fresh stream.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    if isinstance(seed, (int, np.integer)) and not isinstance(seed, bool):
        if seed < 0:
            raise ValueError(f"seed must be nonnegative, got {seed}")
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    raise TypeError(f"cannot build a random stream from {type(seed).__name__}")


def spawn(base_seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index``."""
    return as_generator(replicate_seed(base_seed, index))
