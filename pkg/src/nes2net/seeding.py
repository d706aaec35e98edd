"""Named sub-seeds derived from one run seed.

Each consumer hashes its own name into a :class:`numpy.random.SeedSequence`
together with the run seed, so adding a consumer never shifts the stream
another one sees.
"""
from __future__ import annotations

import zlib

import numpy as np


def sub_seed(seed: int, name: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))])


def rng_for(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(sub_seed(seed, name))


def int_seed(seed: int, name: str) -> int:
    return int(sub_seed(seed, name).generate_state(1)[0])
