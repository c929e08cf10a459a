"""Seedable, splittable random streams.

Every stochastic component draws from a ``numpy.random.Generator``. For
simulations, each replicate receives an independent stream derived from
``(master_seed, domain, index)`` via ``SeedSequence`` spawn keys, so results
are reproducible and independent of worker scheduling.
"""

from __future__ import annotations

import numpy as np

# Spawn-key domains; replicate streams are keyed by (REPLICATE, index).
POPULATION_DOMAIN = 0
REPLICATE_DOMAIN = 1


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Return a generator for ``seed`` refined by an optional spawn key."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def replicate_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for simulation replicate ``index``."""
    return make_rng(master_seed, REPLICATE_DOMAIN, index)
