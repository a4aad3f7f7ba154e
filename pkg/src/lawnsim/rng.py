"""Seeded random streams.

Every stream is a numpy ``Generator`` over the Philox-4x64 counter-based bit
generator. The 128-bit Philox key is derived from the tuple of integers
``(seed, *path)`` with ``numpy.random.SeedSequence``, so any implementation
that reproduces SeedSequence and Philox reproduces our draws exactly.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Return the stream addressed by ``seed`` and an optional index path.

    ``make_rng(s, t)`` is the stream of trial ``t`` under experiment seed ``s``;
    streams with different paths are statistically independent.
    """
    if seed < 0 or any(p < 0 for p in path):
        raise ValueError("seed and path entries must be nonnegative")
    ss = np.random.SeedSequence([int(seed), *map(int, path)])
    return np.random.Generator(np.random.Philox(ss))
