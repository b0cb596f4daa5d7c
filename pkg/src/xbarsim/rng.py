"""Named, seed-derived random streams.

Every stochastic subsystem gets its own ``numpy.random.Generator`` derived
from one top-level seed and a stream name, so that e.g. changing the number
of inference seeds does not perturb the pulse trains drawn during training.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part: str | int) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def derive_seed_sequence(seed: int, *names: str | int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(n) for n in names))


def stream(seed: int, *names: str | int) -> np.random.Generator:
    """Return an independent generator for ``(seed, *names)``.

    The same arguments always give a generator in the same state.
    """
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(seed, *names)))
