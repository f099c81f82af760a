"""
Stability Statistic Module

V(v_1..v_m) = 1 - ||mean_j v_j||^2 / mean_j ||v_j||^2

V is 0 when all coefficient vectors agree and grows towards 1 - 1/m as they
point in unrelated directions.
"""

import numpy as np

from src.core.data import CoefficientSet
from src.core.errors import UndefinedStatisticError


def stability_statistic(coeffs) -> float:
    """
    Stability of a set of coefficient vectors

    Args:
        coeffs: CoefficientSet, or anything CoefficientSet accepts (m x d array)

    Returns:
        Value in [0, 1]
    """
    if not isinstance(coeffs, CoefficientSet):
        coeffs = CoefficientSet(coeffs)
    vectors = coeffs.vectors
    mean_sq_norm = float(np.mean(np.sum(vectors * vectors, axis=1)))
    if mean_sq_norm == 0.0:
        raise UndefinedStatisticError("stability statistic is 0/0: every coefficient vector is zero")
    mean = vectors.mean(axis=0)
    value = 1.0 - float(mean @ mean) / mean_sq_norm
    # identical vectors give 0 up to rounding
    if abs(value) <= 1e-12:
        return 0.0
    return min(max(value, 0.0), 1.0)


def stability_statistic_batch(coeffs: np.ndarray) -> np.ndarray:
    """
    Vectorised V over replicates

    Args:
        coeffs: Array of shape (m, d, B), one coefficient set per column b

    Returns:
        Array of B statistics; NaN where a replicate is 0/0
    """
    mean_sq_norm = np.mean(np.sum(coeffs * coeffs, axis=1), axis=0)
    mean = coeffs.mean(axis=0)
    sq_mean_norm = np.sum(mean * mean, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = 1.0 - sq_mean_norm / mean_sq_norm
    values = np.where(np.abs(values) <= 1e-12, 0.0, values)
    values = np.clip(values, 0.0, 1.0)
    return np.where(mean_sq_norm == 0.0, np.nan, values)
