"""
Ridge Module

Ridge regression of Y on W with an unpenalised intercept, computed from the
SVD of the centred background matrix. The same decomposition gives the hat
matrix, so residualizing many vectors and scoring generalized cross
validation over a whole lambda grid costs one factorization.
"""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from src.core.config import config
from src.core.errors import InvalidInputError, SingularDesignError
from src.regression.averaging import GammaEstimate

logger = logging.getLogger(__name__)


class RidgeSmoother:
    """Centred SVD of W plus the shrinkage factors for one lambda"""

    def __init__(self, w: np.ndarray, penalty: float, rank_tol: Optional[float] = None):
        """
        Initialize a ridge smoother

        Args:
            w: Background matrix, l x q (q may be 0)
            penalty: lambda >= 0
            rank_tol: Singular values below rank_tol * s_max count as zero
        """
        w = np.asarray(w, dtype=float)
        if penalty < 0 or not np.isfinite(penalty):
            raise InvalidInputError(f"ridge penalty must be finite and non-negative, got {penalty}")
        rank_tol = config['RANK_TOL'] if rank_tol is None else rank_tol
        self.n_rows = w.shape[0]
        self.penalty = float(penalty)
        self.w_mean = w.mean(axis=0) if w.shape[1] else np.zeros(0)
        centred = w - self.w_mean
        if w.shape[1] == 0:
            self.u = np.zeros((self.n_rows, 0))
            self.s = np.zeros(0)
            self.vt = np.zeros((0, 0))
        else:
            u, s, vt = linalg.svd(centred, full_matrices=False)
            keep = s > rank_tol * (s[0] if s.size and s[0] > 0 else 1.0)
            if penalty == 0 and not np.all(keep):
                raise SingularDesignError(
                    "ridge with lambda = 0 needs a full-rank centred background matrix")
            self.u, self.s, self.vt = u[:, keep], s[keep], vt[keep]
        self.shrink = self.s ** 2 / (self.s ** 2 + self.penalty)

    @property
    def effective_dof(self) -> float:
        """Trace of the hat matrix, intercept included"""
        return 1.0 + float(self.shrink.sum())

    def fitted(self, values: np.ndarray) -> np.ndarray:
        """H values for a vector or each column of a matrix"""
        mean = values.mean(axis=0)
        centred = values - mean
        if values.ndim == 1:
            return mean + self.u @ (self.shrink * (self.u.T @ centred))
        return mean + self.u @ (self.shrink[:, None] * (self.u.T @ centred))

    def residualize(self, values: np.ndarray) -> np.ndarray:
        """(I - H) values"""
        values = np.asarray(values, dtype=float)
        return values - self.fitted(values)

    def coefficients(self, y: np.ndarray):
        """(intercept, gamma) minimising ||y - c - W g||^2 + lambda ||g||^2"""
        y_mean = float(np.mean(y))
        if self.s.size == 0:
            return y_mean, np.zeros(self.w_mean.shape[0])
        gamma = self.vt.T @ ((self.s / (self.s ** 2 + self.penalty)) * (self.u.T @ (y - y_mean)))
        return y_mean - float(self.w_mean @ gamma), gamma

    def gcv_score(self, y: np.ndarray) -> float:
        """l * RSS / (l - tr H)^2"""
        residuals = self.residualize(y)
        slack = self.n_rows - self.effective_dof
        if slack <= 0:
            return float("inf")
        return self.n_rows * float(residuals @ residuals) / slack ** 2

    def with_penalty(self, penalty: float) -> 'RidgeSmoother':
        """Same decomposition, different lambda"""
        if penalty < 0 or not np.isfinite(penalty):
            raise InvalidInputError(f"ridge penalty must be finite and non-negative, got {penalty}")
        clone = object.__new__(RidgeSmoother)
        clone.__dict__.update(self.__dict__)
        clone.penalty = float(penalty)
        clone.shrink = self.s ** 2 / (self.s ** 2 + clone.penalty)
        return clone


def gcv_select(y: np.ndarray, w: np.ndarray, grid: Optional[Sequence[float]] = None) -> float:
    """
    Lambda from the grid minimising generalized cross validation

    Ties go to the smallest lambda in grid order.
    """
    y = np.asarray(y, dtype=float)
    grid = list(config['RIDGE_GRID'] if grid is None else grid)
    if not grid:
        raise InvalidInputError("ridge lambda grid is empty")
    positive = [g for g in grid if g > 0]
    base = RidgeSmoother(w, positive[0] if positive else grid[0])
    best, best_score = None, float("inf")
    for penalty in grid:
        score = base.with_penalty(penalty).gcv_score(y)
        if score < best_score:
            best, best_score = penalty, score
    if best is None:
        raise InvalidInputError("generalized cross validation is undefined for every lambda on the grid")
    logger.debug("GCV selected lambda=%g (score %.6g)", best, best_score)
    return float(best)


def ridge_fit(y: np.ndarray, w: np.ndarray, penalty: Optional[float] = None,
              grid: Optional[Sequence[float]] = None) -> GammaEstimate:
    """
    Ridge estimate of gamma with unpenalised intercept

    Args:
        y: Response, length l
        w: Background matrix, l x q
        penalty: lambda; None selects it by GCV over `grid`
        grid: GCV grid (config RIDGE_GRID by default)

    Returns:
        GammaEstimate with method 'ridge'
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if w.shape[0] != y.shape[0]:
        raise InvalidInputError(f"w has {w.shape[0]} rows but y has {y.shape[0]}")
    if penalty is None:
        penalty = gcv_select(y, w, grid)
    smoother = RidgeSmoother(w, penalty)
    intercept, gamma = smoother.coefficients(y)
    return GammaEstimate(gamma, "ridge", intercept=intercept, penalty=float(penalty))
