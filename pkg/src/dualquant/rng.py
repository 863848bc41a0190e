"""Seeded, splittable random streams.

Every stochastic routine in the package takes an explicit ``RngStream``;
there is no module-level generator.  Streams are counter-based (Philox),
so a (seed, spawn-key) pair pins the full sequence bit-for-bit and
independent substreams can be derived without coordination.
"""

from __future__ import annotations

import numpy as np


class RngStream:
    """A reproducible random stream identified by a 64-bit seed.

    Parameters
    ----------
    seed : int
        Non-negative integer seed.  Equal seeds (and spawn keys) yield
        identical sequences.
    """

    def __init__(self, seed: int, _spawn_key: tuple[int, ...] = ()):
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = seed
        self.spawn_key = tuple(int(k) for k in _spawn_key)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def substream(self, index: int) -> "RngStream":
        """Return an independent stream derived from this seed and `index`."""
        return RngStream(self.seed, self.spawn_key + (int(index),))

    def uniform(self, size=None):
        """Uniform draws on [0, 1)."""
        return self._gen.random(size)

    def normal(self, size=None):
        """Standard normal draws."""
        return self._gen.standard_normal(size)

    @property
    def generator(self) -> np.random.Generator:
        """The underlying numpy generator (counter-based bit stream)."""
        return self._gen

    def __repr__(self):
        return f"RngStream(seed={self.seed}, spawn_key={self.spawn_key})"
