"""
Model Averaging Module

Estimates of the background coefficients gamma from submodels Y ~ [1, W_S],
combined with uniform or information-criterion weights.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Optional, Sequence, Union

import numpy as np

from src.core.data import SubsetFamily
from src.core.errors import DegenerateFitError, InvalidInputError
from src.regression.ols import QrFactor, design_matrix

logger = logging.getLogger(__name__)

GAMMA_METHODS = ("uniform-average", "weighted-average", "s-aic", "s-bic",
                 "ridge", "single-subset", "oracle")


class GammaEstimate:
    """Estimate of gamma over all q background columns (zeros off the fitted support)"""

    def __init__(self,
                 gamma_hat: np.ndarray,
                 method: str,
                 intercept: float = 0.0,
                 weights: Optional[np.ndarray] = None,
                 penalty: Optional[float] = None):
        """
        Initialize a gamma estimate

        Args:
            gamma_hat: Coefficients, length q
            method: How the estimate was produced (see GAMMA_METHODS)
            intercept: Fitted intercept (kept for prediction, not part of W gamma)
            weights: Submodel weights for averaging methods
            penalty: Ridge lambda for ridge estimates
        """
        gamma_hat = np.atleast_1d(np.asarray(gamma_hat, dtype=float))
        if not np.all(np.isfinite(gamma_hat)):
            raise InvalidInputError("gamma estimate contains non-finite entries")
        if method not in GAMMA_METHODS:
            raise InvalidInputError(f"unknown gamma estimation method '{method}'")
        self.gamma_hat = gamma_hat
        self.method = method
        self.intercept = float(intercept)
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        self.penalty = penalty

    @property
    def q(self) -> int:
        return self.gamma_hat.shape[0]

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.gamma_hat)

    def to_dict(self) -> Dict:
        return {
            "gamma_hat": self.gamma_hat.tolist(),
            "method": self.method,
            "intercept": self.intercept,
            "weights": None if self.weights is None else self.weights.tolist(),
            "penalty": self.penalty,
        }

    @classmethod
    def oracle(cls, gamma: np.ndarray) -> 'GammaEstimate':
        """The true gamma used as the estimate"""
        return cls(gamma, "oracle")


def _submodel_fit(y: np.ndarray, w: np.ndarray, subset: Sequence[int]):
    subset = list(subset)
    n = y.shape[0]
    if n <= len(subset) + 1:
        raise InvalidInputError(f"need more than |S| + 1 = {len(subset) + 1} rows, got {n}")
    design = design_matrix([w[:, subset]])
    names = ["const"] + [f"w{i}" for i in subset]
    coef = QrFactor(design, names).solve(y)
    gamma = np.zeros(w.shape[1])
    gamma[subset] = coef[1:]
    residuals = y - design @ coef
    return gamma, float(coef[0]), residuals


def gamma_hat_submodel(y: np.ndarray, w: np.ndarray, subset: Sequence[int]) -> GammaEstimate:
    """
    gamma from the submodel Y ~ [1, W_S], zero outside S

    Args:
        y: Response, length l
        w: Background matrix, l x q
        subset: Background indices S

    Returns:
        GammaEstimate with method 'single-subset'
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    gamma, intercept, _ = _submodel_fit(y, w, subset)
    return GammaEstimate(gamma, "single-subset", intercept=intercept)


def _fit_family(y, w, family: SubsetFamily, workers: int = 1):
    if family.q != w.shape[1]:
        raise InvalidInputError(f"subset family lives in range({family.q}) but w has {w.shape[1]} columns")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda s: _submodel_fit(y, w, s), family.subsets))
    return [_submodel_fit(y, w, s) for s in family.subsets]


def _check_simplex(weights: np.ndarray, m: int) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (m,):
        raise InvalidInputError(f"expected {m} weights, got shape {weights.shape}")
    if np.any(weights < 0):
        raise InvalidInputError("weights must be non-negative")
    if abs(weights.sum() - 1.0) > 1e-8:
        raise InvalidInputError(f"weights must sum to 1, got {weights.sum()}")
    return weights


def model_average_gamma(y: np.ndarray,
                        w: np.ndarray,
                        family: SubsetFamily,
                        weights: Union[None, str, Sequence[float]] = None,
                        workers: int = 1) -> GammaEstimate:
    """
    Weighted average of submodel estimates gamma_hat(S_j)

    Args:
        y: Response, length l
        w: Background matrix, l x q
        family: Subsets S_1..S_m
        weights: None or "uniform" for 1/m each, "aic"/"bic" for smoothed
            information-criterion weights, or an explicit simplex vector
        workers: Threads used for the independent submodel fits

    Returns:
        GammaEstimate
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    fits = _fit_family(y, w, family, workers)
    m = family.m
    if weights is None or (isinstance(weights, str) and weights == "uniform"):
        weights = np.full(m, 1.0 / m)
        method = "uniform-average"
    elif isinstance(weights, str):
        kind = weights.lower()
        weights = _xic_from_fits(fits, family, y, kind)
        method = f"s-{kind}"
    else:
        weights = _check_simplex(weights, m)
        method = "weighted-average"

    gammas = np.stack([f[0] for f in fits])
    intercepts = np.array([f[1] for f in fits])
    return GammaEstimate(weights @ gammas, method, intercept=float(weights @ intercepts),
                         weights=weights)


def weights_from_scores(scores: Sequence[float]) -> np.ndarray:
    """
    exp(-xIC_j / 2) normalised to the simplex

    The minimum score is subtracted first so large scores cannot overflow.
    """
    scores = np.asarray(scores, dtype=float)
    shifted = np.exp(-(scores - scores.min()) / 2.0)
    return shifted / shifted.sum()


def xic_scores(sigma2: np.ndarray, sizes: np.ndarray, n_samples: int, kind: str) -> np.ndarray:
    """AIC_j = l log s2_j + 2 k_j;  BIC_j = l log s2_j + 2 k_j log l"""
    kind = kind.lower()
    if kind == "aic":
        penalty = 2.0 * sizes
    elif kind == "bic":
        penalty = 2.0 * sizes * np.log(n_samples)
    else:
        raise InvalidInputError(f"unknown information criterion '{kind}', expected 'aic' or 'bic'")
    return n_samples * np.log(sigma2) + penalty


def _xic_from_fits(fits, family: SubsetFamily, y: np.ndarray, kind: str) -> np.ndarray:
    n_samples = y.shape[0]
    sigma2 = np.array([float(f[2] @ f[2]) / n_samples for f in fits])
    # residual variance at rounding level of Var(Y) counts as an exact fit
    floor = 1e-20 * max(float(np.var(y)), np.finfo(float).tiny)
    degenerate = np.flatnonzero(sigma2 <= floor)
    if degenerate.size:
        raise DegenerateFitError(f"submodel {int(degenerate[0])} fits Y exactly; "
                                 "information-criterion weights are undefined")
    sizes = np.array([len(s) for s in family.subsets], dtype=float)
    return weights_from_scores(xic_scores(sigma2, sizes, n_samples, kind))


def xic_weights(y: np.ndarray, w: np.ndarray, family: SubsetFamily, kind: str = "aic",
                workers: int = 1) -> np.ndarray:
    """
    Smoothed AIC / BIC weights of the submodels Y ~ [1, W_{S_j}]

    Args:
        y: Response, length l
        w: Background matrix, l x q
        family: Subsets S_1..S_m
        kind: "aic" or "bic"

    Returns:
        Weight vector on the unit simplex
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    fits = _fit_family(y, w, family, workers)
    return _xic_from_fits(fits, family, y, kind)
