"""Named random substreams derived from a single root seed."""

from __future__ import annotations

import zlib

import numpy as np


def _key_words(keys: tuple[object, ...]) -> tuple[int, ...]:
    words: list[int] = []
    for key in keys:
        if isinstance(key, (int, np.integer)):
            words.append(int(key) & 0xFFFFFFFF)
        else:
            words.append(zlib.crc32(str(key).encode("utf-8")))
    return tuple(words)


def seed_sequence(root: int, *keys: object) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(root), spawn_key=_key_words(keys))


def substream(root: int, *keys: object) -> np.random.Generator:
    """Generator for the substream named by ``keys`` under ``root``.

    The stream depends only on (root, keys), never on call order.
    """
    return np.random.default_rng(seed_sequence(root, *keys))


def derive_seed(root: int, *keys: object) -> int:
    return int(seed_sequence(root, *keys).generate_state(1, dtype=np.uint32)[0])
