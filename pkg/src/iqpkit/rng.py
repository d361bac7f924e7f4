"""Seeded, splittable random streams.

Every stochastic routine in the package takes a ``numpy.random.Generator``.
Generators are built from PCG64 (128-bit state, XSL-RR output, 64-bit words)
seeded through ``SeedSequence``; independent child streams come from
``SeedSequence.spawn``, so a single integer seed fans out into a tree of
reproducible streams.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int | np.random.SeedSequence | None = 0) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    if seed is not None and seed < 0:
        raise ValueError("seed must be a non-negative integer")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def split(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """Child generators, one per index.

    The parent's draw sequence is untouched; repeated calls yield fresh,
    still deterministic, children.
    """
    seq = rng.bit_generator.seed_seq
    return [np.random.Generator(np.random.PCG64(s)) for s in seq.spawn(count)]
