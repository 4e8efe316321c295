"""Deterministic named random streams.

Every stochastic stage derives its generator from (user seed, stream name),
so adding a consumer never shifts the draws of another stage.
"""
from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, name: str, *indices: int) -> np.random.Generator:
    """Generator for a named stream, optionally sub-indexed (scene id, ...)."""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag, *map(int, indices)]))
