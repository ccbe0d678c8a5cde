# filtering/noise.py
"""
Counter-based Gaussian noise streams.

Every draw is addressed by (seed, stream, step): the Philox key is derived
from (seed, stream) and the grid step selects a disjoint block of the
counter space. Draws therefore never depend on the order in which streams
are consumed, on the ensemble size, or on the number of worker threads.
"""
from __future__ import annotations

import enum
from functools import lru_cache

import numpy as np

from .exceptions import ContractError


class Stream(enum.IntEnum):
    """Reserved stream identifiers"""
    TRUTH_INITIAL = 0
    TRUTH_W = 1
    TRUTH_V = 2  # shared by the signal's C~ dV term and the observation noise
    ENSEMBLE_INITIAL = 3
    PARTICLE_W = 4
    PARTICLE_V = 5
    PATHS_INITIAL = 6
    PATHS_W = 7
    PATHS_V = 8


MAX_SEED = 2 ** 64 - 1


@lru_cache(maxsize=1024)
def _stream_key(seed, stream):
    return tuple(int(k) for k in np.random.SeedSequence([seed, int(stream)]).generate_state(2, np.uint64))


class NoiseStreams:
    """Gaussian draws keyed by (seed, stream, step)"""

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed <= MAX_SEED:
            raise ContractError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed

    def generator(self, stream, step=0):
        key = np.array(_stream_key(self.seed, stream), dtype=np.uint64)
        counter = np.array([0, step, 0, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=counter))

    def standard_normal(self, stream, step, shape):
        return self.generator(stream, step).standard_normal(shape)

    def increments(self, stream, step, dim, dt):
        """Brownian increment of dimension `dim` over a step of length dt"""
        return self.standard_normal(stream, step, dim) * np.sqrt(dt)

    def particle_increments(self, stream, step, dim, m, dt):
        """
        d x M matrix of Brownian increments, one column per particle.

        Values are drawn particle-major, so particle i receives the same
        increments for every ensemble size M > i.
        """
        return self.standard_normal(stream, step, (m, dim)).T * np.sqrt(dt)

    def particle_normals(self, stream, step, dim, m):
        return self.standard_normal(stream, step, (m, dim)).T
