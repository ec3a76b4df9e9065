"""
Deterministic random streams.

Every consumer derives its generator from the experiment seed plus a fixed
path of integers (e.g. ``("user", region, user)``), so results never depend
on execution order or worker count.
"""

from __future__ import annotations

import zlib

import numpy as np
import torch


def _path_entropy(path: tuple[str | int, ...]) -> list[int]:
    words = []
    for part in path:
        if isinstance(part, str):
            words.append(zlib.crc32(part.encode("utf-8")))
        else:
            words.append(int(part))
    return words


def seed_sequence(seed: int, *path: str | int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), *_path_entropy(path)])


def numpy_rng(seed: int, *path: str | int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *path))


def torch_generator(seed: int, *path: str | int) -> torch.Generator:
    state = seed_sequence(seed, *path).generate_state(1, dtype=np.uint64)[0]
    generator = torch.Generator()
    generator.manual_seed(int(state) & 0x7FFF_FFFF_FFFF_FFFF)
    return generator
