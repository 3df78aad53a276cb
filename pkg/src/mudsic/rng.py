"""Deterministic RNG substreams.

Every stochastic operation takes an explicit ``numpy.random.Generator``.
Experiment code derives one independent stream per (seed, label, index...)
path, so results do not depend on scheduling or thread count: trial ``t``
always consumes ``substream(seed, "fade", t)`` regardless of which worker
runs it.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"stream path parts must be int or str, got {type(part)!r}")


def substream(seed: int, *path) -> np.random.Generator:
    """Independent generator for the given (seed, *path) address.

    Two calls with the same arguments return generators producing identical
    sequences; distinct paths give statistically independent streams.
    """
    key = tuple(_key_part(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))
