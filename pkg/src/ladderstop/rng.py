"""Seed-addressed random streams.

A ``RandomStream`` is an immutable address (seed plus spawn path) that can be
turned into a fresh ``numpy.random.Generator`` at any time.  Two calls to
``generator()`` on the same stream give identical draws, which is what makes
common-random-number comparisons across starting points possible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Replications are grouped into fixed-size blocks; block j always draws from
# child stream j, so results do not depend on how blocks are scheduled.
BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class RandomStream:
    seed: int
    path: tuple[int, ...] = ()

    def child(self, index: int) -> "RandomStream":
        return RandomStream(self.seed, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(seq))


def as_stream(rng: "RandomStream | int") -> RandomStream:
    if isinstance(rng, RandomStream):
        return rng
    return RandomStream(int(rng))


def blocks(reps: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int]]:
    """Split ``reps`` into ``(start, stop)`` index ranges of fixed size."""
    return [(lo, min(lo + block_size, reps)) for lo in range(0, reps, block_size)]
