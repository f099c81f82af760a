"""
Baselines Module

Ridge-based residual permutation tests of Y independent of X given W:

- Freedman-Lane (FL): pseudo-responses W gamma_ridge + permuted ridge
  residuals; the statistic is the squared norm of the vector of partial
  correlations of Y with each column of X given W.
- Double residualization (DR): residualize Y and every X column on W, then
  permute the Y residuals and residualize them again on W before
  correlating with the fixed X residuals.

For d > 1 the per-column correlations are aggregated by their squared
Euclidean norm. Both tests ignore hidden confounding.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional

import numpy as np

from src.core.config import config
from src.core.data import Dataset
from src.core.errors import DegenerateResidualError, InvalidInputError
from src.core.rng import permutation_stream
from src.inference.permtest import permutation_p_value
from src.regression.ridge import RidgeSmoother, gcv_select

logger = logging.getLogger(__name__)


_DEGENERATE_TOL = 1e-10


class BaselineResult:
    """Statistic and p-value of one baseline test"""

    def __init__(self, statistic: float, p_value: float, method: str, penalty: float,
                 null: Optional[np.ndarray] = None):
        self.statistic = float(statistic)
        self.p_value = float(p_value)
        self.method = method
        self.penalty = float(penalty)
        self.null = None if null is None else np.asarray(null, dtype=float)

    def to_dict(self) -> Dict:
        return {
            "method": self.method,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "penalty": self.penalty,
        }

    def __repr__(self) -> str:
        return f"BaselineResult({self.method}: T={self.statistic:.4g}, p={self.p_value:.4g}, lambda={self.penalty:g})"


def _checked_residuals(smoother: RidgeSmoother, values: np.ndarray, label: str) -> np.ndarray:
    residuals = smoother.residualize(values)
    raw = np.atleast_2d(values.T).T
    res = np.atleast_2d(residuals.T).T
    for c in range(res.shape[1]):
        spread = float(np.var(raw[:, c]))
        if float(np.var(res[:, c])) <= _DEGENERATE_TOL * max(spread, 1.0):
            raise DegenerateResidualError(
                f"{label} column {c} has no variance left after residualizing on W")
    return residuals


def _squared_correlation_norm(responses: np.ndarray, x_residuals: np.ndarray) -> np.ndarray:
    """sum_c corr(responses[:, b], x_residuals[:, c])^2 for every column b"""
    r = responses - responses.mean(axis=0)
    x = x_residuals - x_residuals.mean(axis=0)
    r_norm = np.linalg.norm(r, axis=0)
    x_norm = np.linalg.norm(x, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = (r.T @ x) / np.outer(r_norm, x_norm)
    return np.sum(np.nan_to_num(corr) ** 2, axis=1)


def _run_null(statistic: Callable[[np.ndarray], np.ndarray], n_permutations: int, seed: int,
              n: int, workers: int) -> np.ndarray:
    batch_size = int(config['PERM_BATCH'])
    batches = [list(range(start, min(start + batch_size, n_permutations)))
               for start in range(0, n_permutations, batch_size)]

    def run_batch(indices: List[int]) -> np.ndarray:
        return statistic(permutation_stream(seed, indices, n))

    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.concatenate(list(pool.map(run_batch, batches)))
    return np.concatenate([run_batch(b) for b in batches])


def _prepare(data: Dataset, penalty: Optional[float], n_permutations: int):
    if n_permutations < 1:
        raise InvalidInputError(f"need at least one permutation, got {n_permutations}")
    if data.n_samples <= data.d + 2:
        raise InvalidInputError(f"need more than d + 2 = {data.d + 2} rows, got {data.n_samples}")
    if penalty is None:
        penalty = gcv_select(data.y, data.w)
    smoother = RidgeSmoother(data.w, penalty)
    x_residuals = _checked_residuals(smoother, data.x, "X")
    y_residuals = _checked_residuals(smoother, data.y[:, None], "Y")[:, 0]
    return smoother, x_residuals, y_residuals, float(penalty)


def freedman_lane_test(data: Dataset, penalty: Optional[float] = None, n_permutations: int = 999,
                       seed: int = 0, workers: int = 1) -> BaselineResult:
    """
    Freedman-Lane permutation test with a ridge nuisance fit

    Args:
        data: Observed dataset
        penalty: Ridge lambda; None selects it by GCV
        n_permutations: M
        seed: Master seed; replicate i uses substream (seed, "perm", i)
        workers: Threads over replicate batches

    Returns:
        BaselineResult
    """
    smoother, x_residuals, y_residuals, penalty = _prepare(data, penalty, n_permutations)
    fitted = data.y - y_residuals
    observed = float(_squared_correlation_norm(y_residuals[:, None], x_residuals)[0])

    def statistic(perms: np.ndarray) -> np.ndarray:
        responses = fitted[:, None] + y_residuals[perms].T
        return _squared_correlation_norm(smoother.residualize(responses), x_residuals)

    null = _run_null(statistic, n_permutations, seed, data.n_samples, workers)
    return BaselineResult(observed, permutation_p_value(observed, null, tail="upper"), "fl", penalty, null)


def double_residualization_test(data: Dataset, penalty: Optional[float] = None,
                                n_permutations: int = 999, seed: int = 0,
                                workers: int = 1) -> BaselineResult:
    """
    Double residualization permutation test

    Args:
        data: Observed dataset
        penalty: Ridge lambda; None selects it by GCV
        n_permutations: M
        seed: Master seed
        workers: Threads over replicate batches

    Returns:
        BaselineResult
    """
    smoother, x_residuals, y_residuals, penalty = _prepare(data, penalty, n_permutations)

    def statistic(perms: np.ndarray) -> np.ndarray:
        # (I - H) e_Y^pi; the identity permutation gives the observed value
        return _squared_correlation_norm(smoother.residualize(y_residuals[perms].T), x_residuals)

    observed = float(statistic(np.arange(data.n_samples)[None, :])[0])

    null = _run_null(statistic, n_permutations, seed, data.n_samples, workers)
    return BaselineResult(observed, permutation_p_value(observed, null, tail="upper"), "dr", penalty, null)
