"""
Random Stream Module

Every random draw in the package comes from a substream keyed by
(master seed, purpose tag, index). Streams use the counter-based Philox
bit generator seeded through SeedSequence, so they are independent and can
be created in any order or on any worker.

Frozen mapping:
    substream(seed, tag, index) =
        Generator(Philox(SeedSequence(seed, spawn_key=(crc32(tag), index))))
"""

import zlib
from typing import Sequence

import numpy as np

from src.core.errors import InvalidInputError


def tag_key(tag: str) -> int:
    """Stable integer key for a purpose tag"""
    return zlib.crc32(tag.encode("utf-8"))


def substream(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """
    Build the generator for one (seed, tag, index) stream

    Args:
        seed: Master seed (non-negative integer)
        tag: Purpose of the stream, e.g. "perm" or "rep"
        index: Replicate, row or draw index

    Returns:
        A numpy Generator backed by Philox
    """
    if seed is None or int(seed) < 0:
        raise InvalidInputError(f"seed must be a non-negative integer, got {seed}")
    if int(index) < 0:
        raise InvalidInputError(f"stream index must be non-negative, got {index}")
    seq = np.random.SeedSequence(int(seed), spawn_key=(tag_key(tag), int(index)))
    return np.random.Generator(np.random.Philox(seq))


def child_seed(seed: int, tag: str, index: int = 0) -> int:
    """Derive a new master seed from a stream, for nested procedures"""
    seq = np.random.SeedSequence(int(seed), spawn_key=(tag_key(tag), int(index)))
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def permutation_stream(seed: int, indices: Sequence[int], length: int) -> np.ndarray:
    """
    Permutations for the given replicate indices, one row each

    Replicate i always uses substream (seed, "perm", i), so extending the
    replicate count never reshuffles earlier draws.
    """
    out = np.empty((len(indices), length), dtype=np.intp)
    for row, i in enumerate(indices):
        out[row] = substream(seed, "perm", i).permutation(length)
    return out
