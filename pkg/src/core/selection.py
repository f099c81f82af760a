"""
Subset Selection Module

Ways of turning one set of background features into several "environments":
uniform random selection of fixed-size subsets, and the disjoint partition
used in the population analysis.
"""

import logging

import numpy as np

from src.core.data import SubsetFamily
from src.core.errors import InvalidSubsetError
from src.core.rng import substream

logger = logging.getLogger(__name__)


def random_selection(q: int, k: int, m: int, seed: int) -> SubsetFamily:
    """
    Draw m subsets of size k uniformly from range(q)

    Subsets are drawn independently, so repeats across j are possible.
    Subset j comes from substream (seed, "subsets", j).

    Args:
        q: Number of background features
        k: Size of every subset, 1 <= k < q
        m: Number of subsets
        seed: Master seed

    Returns:
        SubsetFamily with m sorted subsets
    """
    if k < 1 or k >= q:
        raise InvalidSubsetError(f"subset size must satisfy 1 <= k < q, got k={k}, q={q}")
    if m < 1:
        raise InvalidSubsetError(f"need at least one subset, got m={m}")
    subsets = [np.sort(substream(seed, "subsets", j).choice(q, size=k, replace=False))
               for j in range(m)]
    logger.debug("drew %d random subsets of size %d from %d features", m, k, q)
    return SubsetFamily(q, subsets)


def partition_selection(q: int, k: int) -> SubsetFamily:
    """
    Split range(q) into consecutive disjoint blocks of size k

    Args:
        q: Number of background features
        k: Block size; must divide q and be smaller than q

    Returns:
        SubsetFamily of q / k blocks
    """
    if k < 1 or k >= q:
        raise InvalidSubsetError(f"partition blocks must be proper subsets: need 1 <= k < q, got k={k}, q={q}")
    if q % k != 0:
        raise InvalidSubsetError(f"block size {k} does not divide q={q}")
    return SubsetFamily(q, [range(start, start + k) for start in range(0, q, k)])
