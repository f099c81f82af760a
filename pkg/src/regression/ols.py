"""
OLS Module

Least squares through a column-pivoted (rank-revealing) QR factorization.
Normal equations are never formed. The factorization of a design can be
kept and applied to many responses at once, which is what the permutation
test does for every background subset.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import linalg, stats

from src.core.config import config
from src.core.data import Dataset
from src.core.errors import InvalidInputError, SingularDesignError

logger = logging.getLogger(__name__)


class OlsFit:
    """Result of one least-squares fit, coefficients in design order"""

    def __init__(self,
                 coefficients: np.ndarray,
                 residuals: np.ndarray,
                 dof: int,
                 sigma2_hat: float,
                 stderr: np.ndarray,
                 t_stats: np.ndarray,
                 p_values: np.ndarray,
                 names: List[str]):
        self.coefficients = coefficients
        self.residuals = residuals
        self.dof = dof
        self.sigma2_hat = sigma2_hat
        self.stderr = stderr
        self.t_stats = t_stats
        self.p_values = p_values
        self.names = names

    @property
    def rss(self) -> float:
        return float(self.residuals @ self.residuals)

    def to_frame(self) -> pd.DataFrame:
        """Classical summary table: coef, std_err, t, p_value per regressor"""
        return pd.DataFrame({
            "coef": self.coefficients,
            "std_err": self.stderr,
            "t": self.t_stats,
            "p_value": self.p_values,
        }, index=pd.Index(self.names, name="regressor"))


class QrFactor:
    """
    Pivoted QR of a design matrix, checked for full column rank

    coef = R^-1 Q' y (un-pivoted) for any response y.
    """

    def __init__(self, design: np.ndarray, names: Optional[Sequence[str]] = None,
                 rank_tol: Optional[float] = None):
        design = np.asarray(design, dtype=float)
        n, p = design.shape
        if p > n:
            raise InvalidInputError(f"design has {p} columns but only {n} rows")
        self.names = list(names) if names is not None else [f"c{i}" for i in range(p)]
        self.n_rows = n
        self.n_cols = p
        if p == 0:
            self.q = np.zeros((n, 0))
            self.r = np.zeros((0, 0))
            self.perm = np.zeros(0, dtype=int)
            return

        rank_tol = config['RANK_TOL'] if rank_tol is None else rank_tol
        q, r, perm = linalg.qr(design, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        # a zero column gives diag[0] == 0 and is caught the same way
        scale = diag[0] if diag[0] > 0 else 1.0
        rank = int(np.sum(diag > rank_tol * scale)) if diag[0] > 0 else 0
        if rank < p:
            offending = self.names[perm[rank]]
            raise SingularDesignError("design matrix is rank deficient", column=offending)
        self.q = q
        self.r = r
        self.perm = perm

    def solve(self, response: np.ndarray) -> np.ndarray:
        """Coefficients for one response vector or for each column of a matrix"""
        qty = self.q.T @ response
        pivoted = linalg.solve_triangular(self.r, qty)
        coef = np.empty_like(pivoted)
        coef[self.perm] = pivoted
        return coef

    def projector(self, rows: slice) -> np.ndarray:
        """
        The rows of the coefficient map R^-1 Q' (un-pivoted) selected by `rows`

        coef[rows] = projector(rows) @ y for every y, so a block of
        coefficients can be recomputed by one matrix product.
        """
        full = np.empty((self.n_cols, self.n_rows))
        full[self.perm] = linalg.solve_triangular(self.r, self.q.T)
        return full[rows]

    def unscaled_covariance(self) -> np.ndarray:
        """(D'D)^-1 in design order"""
        r_inv = linalg.solve_triangular(self.r, np.eye(self.n_cols))
        cov_p = r_inv @ r_inv.T
        cov = np.empty_like(cov_p)
        cov[np.ix_(self.perm, self.perm)] = cov_p
        return cov


def design_matrix(blocks: Sequence[np.ndarray], with_intercept: bool = True) -> np.ndarray:
    """Column-stack regressor blocks, optionally behind a column of ones"""
    n = blocks[0].shape[0]
    parts = [np.ones((n, 1))] if with_intercept else []
    parts.extend(np.asarray(b, dtype=float).reshape(n, -1) for b in blocks)
    return np.hstack(parts) if parts else np.empty((n, 0))


def ols_fit(y: np.ndarray,
            design: np.ndarray,
            with_intercept: bool = True,
            names: Optional[Sequence[str]] = None) -> OlsFit:
    """
    Ordinary least squares with classical inference

    Args:
        y: Response, length l
        design: l x p regressors (no intercept column)
        with_intercept: Prepend an unpenalised intercept
        names: Labels of the design columns

    Returns:
        OlsFit; inference fields are NaN when there are no residual degrees of freedom
    """
    y = np.asarray(y, dtype=float)
    design = np.asarray(design, dtype=float)
    if design.ndim == 1:
        design = design[:, None]
    if design.shape[0] != y.shape[0]:
        raise InvalidInputError(f"design has {design.shape[0]} rows but y has {y.shape[0]}")
    names = list(names) if names is not None else [f"x{i}" for i in range(design.shape[1])]
    full = design_matrix([design], with_intercept)
    if with_intercept:
        names = ["const"] + names
    if full.shape[1] > full.shape[0]:
        raise InvalidInputError(f"{full.shape[1]} coefficients cannot be fitted from {full.shape[0]} rows")

    factor = QrFactor(full, names)
    coef = factor.solve(y)
    residuals = y - full @ coef
    n, p = full.shape
    dof = n - p
    if dof >= 1:
        sigma2 = float(residuals @ residuals) / dof
        stderr = np.sqrt(sigma2 * np.diag(factor.unscaled_covariance()))
        with np.errstate(divide="ignore", invalid="ignore"):
            t_stats = coef / stderr
        p_values = 2.0 * stats.t.sf(np.abs(t_stats), dof)
    else:
        sigma2 = float("nan")
        stderr = np.full(p, np.nan)
        t_stats = np.full(p, np.nan)
        p_values = np.full(p, np.nan)
    return OlsFit(coef, residuals, dof, sigma2, stderr, t_stats, p_values, names)


def subset_design(data: Dataset, subset: Sequence[int]) -> np.ndarray:
    """[1, X, W_S] for one background subset"""
    return design_matrix([data.x, data.w[:, list(subset)]])


def subset_names(data: Dataset, subset: Sequence[int]) -> List[str]:
    return ["const"] + list(data.names_x) + [data.names_w[i] for i in subset]


def beta_hat_subset(data: Dataset, subset: Sequence[int]) -> np.ndarray:
    """
    Coefficients of X when Y is regressed on [1, X, W_S]

    Args:
        data: Dataset
        subset: Background column indices S

    Returns:
        Vector of length d
    """
    subset = list(subset)
    if data.n_samples <= data.d + len(subset) + 1:
        raise InvalidInputError(
            f"need more than d + |S| + 1 = {data.d + len(subset) + 1} rows, got {data.n_samples}")
    factor = QrFactor(subset_design(data, subset), subset_names(data, subset))
    return factor.solve(data.y)[1:1 + data.d]


def ols_inference_table(data: Dataset) -> pd.DataFrame:
    """
    Classical OLS summary of Y on [1, X, W]

    Returns:
        DataFrame indexed by regressor with coef, std_err, t and p_value
    """
    design = np.hstack([data.x, data.w])
    fit = ols_fit(data.y, design, with_intercept=True,
                  names=list(data.names_x) + list(data.names_w))
    if fit.dof < 1:
        raise InvalidInputError("OLS inference needs at least one residual degree of freedom")
    return fit.to_frame()
