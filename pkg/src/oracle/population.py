"""
Population Oracle Module

Infinite-sample quantities derived exactly from SemParams:

- second moments of (X, W, Y),
- the population coefficient beta_hat(S) of X in the regression of Y on (X, W_S),
- the confounding map C(S) with beta_hat(S) = beta + C(S) gamma,
- for r = 1, the closed form of C(S), the matrix Sigma and the vector v,
- limit constants and condition strengths for subset families,
- samplers for the null distribution of V.

sigma_z is folded into the loadings (A diag(sigma_z), B diag(sigma_z)), so
internally the confounder has unit variance. C(S) is zero on the columns in
S: the bias comes only from the unobserved gamma_{S^c}.
"""

import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from src.core.data import SubsetFamily
from src.core.errors import (InvalidInputError, SingularDesignError,
                             UndefinedLimitError, UndefinedStatisticError)
from src.core.rng import substream
from src.core.stability import stability_statistic
from src.sem.synth import DEFAULT_STUDENT_DF, SemParams, sample_prior

logger = logging.getLogger(__name__)


class PopulationModel:
    """Exact covariance structure of (X, W) and its cross-covariance with Y"""

    def __init__(self, params: SemParams):
        self.params = params
        self.a = params.a * params.sigma_z
        self.b = params.b * params.sigma_z
        var_x = self.b @ self.b.T + np.diag(params.sigma_x ** 2)
        var_w = self.a @ self.a.T + np.diag(params.sigma_w ** 2)
        cov_xw = self.b @ self.a.T
        self.cov_xw = np.block([[var_x, cov_xw], [cov_xw.T, var_w]])

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def q(self) -> int:
        return self.params.q

    def cov_xw_y(self, beta: Optional[np.ndarray] = None,
                 gamma: Optional[np.ndarray] = None) -> np.ndarray:
        """Cov((X, W), Y) for the given coefficients (params' own by default)"""
        beta = self.params.beta if beta is None else np.asarray(beta, dtype=float)
        gamma = self.params.gamma if gamma is None else np.asarray(gamma, dtype=float)
        return self.cov_xw @ np.concatenate([beta, gamma])

    def var_y(self) -> float:
        coef = np.concatenate([self.params.beta, self.params.gamma])
        return float(coef @ self.cov_xw @ coef) + self.params.sigma_y ** 2

    def full_covariance(self) -> np.ndarray:
        """Covariance of (X, W, Y), in that column order"""
        cross = self.cov_xw_y()
        top = np.hstack([self.cov_xw, cross[:, None]])
        bottom = np.append(cross, self.var_y())
        return np.vstack([top, bottom])

    def regression_block(self, subset: Sequence[int]):
        """Index set of (X, W_S) and the Cholesky factor of its covariance"""
        idx = np.concatenate([np.arange(self.d), self.d + np.asarray(list(subset), dtype=int)])
        try:
            factor = linalg.cho_factor(self.cov_xw[np.ix_(idx, idx)])
        except linalg.LinAlgError as e:
            raise SingularDesignError(f"population covariance of (X, W_S) is not positive definite: {e}")
        return idx, factor


class ConfoundingMap:
    """C(S): the d x q map from gamma to the bias of beta_hat(S)"""

    def __init__(self, subset: Sequence[int], c_matrix: np.ndarray):
        self.subset = tuple(subset)
        self.c_matrix = c_matrix

    def bias(self, gamma: np.ndarray) -> np.ndarray:
        return self.c_matrix @ np.asarray(gamma, dtype=float)


def population_covariance(params: SemParams) -> PopulationModel:
    """Second-moment structure of the SEM"""
    return PopulationModel(params)


def _model(source) -> PopulationModel:
    return source if isinstance(source, PopulationModel) else PopulationModel(source)


def population_beta_hat(params, subset: Sequence[int]) -> np.ndarray:
    """
    Top d block of Var(X, W_S)^-1 Cov((X, W_S), Y)

    Args:
        params: SemParams or PopulationModel
        subset: Background indices S (may be empty)

    Returns:
        Vector of length d
    """
    model = _model(params)
    idx, factor = model.regression_block(subset)
    return linalg.cho_solve(factor, model.cov_xw_y()[idx])[:model.d]


def confounding_matrix(params, subset: Sequence[int]) -> ConfoundingMap:
    """
    C(S) from the covariance solve

    Column j is beta_hat(S) for beta = 0, gamma = e_j: zero for j in S,
    and the X block of Var(X, W_S)^-1 Cov((X, W_S), W_j) otherwise.
    """
    model = _model(params)
    subset = sorted(int(i) for i in subset)
    idx, factor = model.regression_block(subset)
    hidden = np.setdiff1d(np.arange(model.q), subset)
    c_matrix = np.zeros((model.d, model.q))
    if hidden.size:
        cross = model.cov_xw[np.ix_(idx, model.d + hidden)]
        c_matrix[:, hidden] = linalg.cho_solve(factor, cross)[:model.d]
    return ConfoundingMap(subset, c_matrix)


def _require_r1(params: SemParams) -> None:
    if params.r != 1:
        raise InvalidInputError(f"closed forms need a single confounder (r = 1), got r = {params.r}")


def _r1_terms(params: SemParams):
    """Normalised loadings, precision-weighted direction and ||b||_x^2"""
    a = params.a[:, 0] * params.sigma_z[0]
    b = params.b[:, 0] * params.sigma_z[0]
    direction = b / params.sigma_x ** 2
    b_norm = float(b @ direction)
    return a, direction, b_norm


def _r1_denominator(params: SemParams, subset: Sequence[int]) -> float:
    a, _, b_norm = _r1_terms(params)
    subset = list(subset)
    return 1.0 + b_norm + float(np.sum(a[subset] ** 2 / params.sigma_w[subset] ** 2))


def confounding_matrix_r1(params: SemParams, subset: Sequence[int]) -> ConfoundingMap:
    """
    Closed form of C(S) for r = 1

        C(S) gamma = a_{S^c}' gamma_{S^c} / (1 + ||b||_x^2 + ||a_S||_S^2) * D_x^-1 b

    with precision weights ||b||_x^2 = sum b_i^2 / sigma_x,i^2 and
    ||a_S||_S^2 = sum_{i in S} a_i^2 / sigma_w,i^2.
    """
    _require_r1(params)
    a, direction, _ = _r1_terms(params)
    subset = sorted(int(i) for i in subset)
    hidden_loadings = a.copy()
    hidden_loadings[subset] = 0.0
    c_matrix = np.outer(direction, hidden_loadings) / _r1_denominator(params, subset)
    return ConfoundingMap(subset, c_matrix)


def sigma_matrix(params: SemParams, family: SubsetFamily) -> np.ndarray:
    """
    m x m matrix with entries

        ||a_{S_i^c & S_j^c}||^2 / (den_i den_j),  den_j = 1 + ||b||_x^2 + ||a_{S_j}||_{S_j}^2
    """
    _require_r1(params)
    a, _, _ = _r1_terms(params)
    if family.q != params.q:
        raise InvalidInputError(f"subset family lives in range({family.q}) but params have q={params.q}")
    hidden = np.ones((family.m, params.q))
    for j, subset in enumerate(family.subsets):
        hidden[j, list(subset)] = 0.0
    weighted = hidden * a
    dens = np.array([_r1_denominator(params, s) for s in family.subsets])
    return (weighted @ weighted.T) / np.outer(dens, dens)


def v_vector(params: SemParams, family: SubsetFamily, gamma: np.ndarray) -> np.ndarray:
    """v_j = a_{S_j^c}' gamma_{S_j^c} / den_j"""
    _require_r1(params)
    a, _, _ = _r1_terms(params)
    gamma = np.asarray(gamma, dtype=float)
    out = np.empty(family.m)
    for j, subset in enumerate(family.subsets):
        hidden = np.ones(params.q, dtype=bool)
        hidden[list(subset)] = False
        out[j] = float(a[hidden] @ gamma[hidden]) / _r1_denominator(params, subset)
    return out


def _confounding_stack(params, family: SubsetFamily) -> np.ndarray:
    model = _model(params)
    if family.q != model.q:
        raise InvalidInputError(f"subset family lives in range({family.q}) but params have q={model.q}")
    return np.stack([confounding_matrix(model, s).c_matrix for s in family.subsets])


def averaged_confounding(params, family: SubsetFamily) -> Tuple[np.ndarray, np.ndarray]:
    """(C_m, C~_m) = (mean_j C(S_j), mean_j C(S_j)' C(S_j))"""
    stack = _confounding_stack(params, family)
    c_mean = stack.mean(axis=0)
    c_tilde = np.einsum("jdq,jdp->qp", stack, stack) / family.m
    return c_mean, c_tilde


def averaged_beta_hat(params, family: SubsetFamily) -> np.ndarray:
    """(1/m) sum_j beta_hat(S_j) = beta + C_m gamma"""
    model = _model(params)
    c_mean, _ = averaged_confounding(model, family)
    return model.params.beta + c_mean @ model.params.gamma


def limit_constant_null(params, family: SubsetFamily) -> float:
    """
    Null limit of V as q grows: 1 - tr(C_m' C_m) / tr(C~_m)

    Raises UndefinedLimitError when there is no confounding (tr(C~_m) = 0).
    """
    stack = _confounding_stack(params, family)
    tr_tilde = float(np.mean(np.sum(stack ** 2, axis=(1, 2))))
    if tr_tilde <= 0.0:
        raise UndefinedLimitError("no confounding: tr(C~_m) = 0, the null limit is 0/0")
    c_mean = stack.mean(axis=0)
    return 1.0 - float(np.sum(c_mean ** 2)) / tr_tilde


def limit_constant_null_r1(params: SemParams, family: SubsetFamily) -> float:
    """r = 1 form of the null limit: 1 - e'Sigma e / tr(Sigma) with e = 1/sqrt(m)"""
    sigma = sigma_matrix(params, family)
    trace = float(np.trace(sigma))
    if trace <= 0.0:
        raise UndefinedLimitError("no confounding: tr(Sigma) = 0, the null limit is 0/0")
    return 1.0 - float(sigma.sum()) / (family.m * trace)


def condition_strength(params, family: SubsetFamily) -> Tuple[float, float]:
    """
    Strength of confounding across the family

    Returns:
        ((1/m) sum_j tr(C(S_j)' C(S_j)), tr(Sigma)/m or NaN when r != 1)
    """
    model = _model(params)
    stack = _confounding_stack(model, family)
    strength = float(np.mean(np.sum(stack ** 2, axis=(1, 2))))
    if model.params.r == 1:
        sigma_strength = float(np.trace(sigma_matrix(model.params, family))) / family.m
    else:
        sigma_strength = float("nan")
    return strength, sigma_strength


def sigma_trace_bound(params: SemParams, family: SubsetFamily) -> float:
    """
    Upper bound (m - 1) ||a||^2 / (m (1 + ||b||_x^2)^2) on tr(Sigma)/m

    Holds for families of disjoint subsets covering range(q) with unit sigma_w.
    """
    _require_r1(params)
    a, _, b_norm = _r1_terms(params)
    m = family.m
    return (m - 1) * float(a @ a) / (m * (1.0 + b_norm) ** 2)


def stability_identity(params: SemParams, family: SubsetFamily,
                       gamma: np.ndarray) -> Tuple[float, float]:
    """
    V of the population coefficients next to its closed form

        1 - gamma' C_m' C_m gamma / gamma' C~_m gamma

    Args:
        params: SEM parameters with beta = 0
        family: Subsets S_1..S_m
        gamma: Background coefficients to evaluate at

    Returns:
        (V from population beta_hat(S_j), closed form); equal up to rounding
    """
    if np.any(params.beta != 0):
        raise InvalidInputError("the stability identity is stated for beta = 0")
    gamma = np.asarray(gamma, dtype=float)
    model = PopulationModel(params.replace(gamma=gamma))
    c_mean, c_tilde = averaged_confounding(model, family)
    denominator = float(gamma @ c_tilde @ gamma)
    if denominator <= 0.0:
        raise UndefinedStatisticError("gamma lies in the null space of every C(S_j): V is 0/0")
    coeffs = np.stack([population_beta_hat(model, s) for s in family.subsets])
    v_pop = stability_statistic(coeffs)
    centred = c_mean @ gamma
    closed_form = 1.0 - float(centred @ centred) / denominator
    return v_pop, closed_form


def sample_null_v_r1(params: SemParams, family: SubsetFamily, n_draws: int, seed: int) -> np.ndarray:
    """
    Null draws of V for r = 1 through the eigendecomposition of Sigma

        V = 1 - |sum_i c_i lambda_i^1/2 g_i|^2 / sum_i lambda_i g_i^2,  g ~ N(0, I_m)

    with Sigma = P diag(lambda) P' and c = e'P.
    """
    sigma = sigma_matrix(params, family)
    eigenvalues, vectors = linalg.eigh(sigma)
    if eigenvalues[0] <= 1e-12 * max(eigenvalues[-1], 0.0) or eigenvalues[-1] <= 0:
        raise InvalidInputError("Sigma is rank deficient; the eigen-route null law needs full rank")
    e = np.full(family.m, 1.0 / np.sqrt(family.m))
    c = e @ vectors
    g = substream(seed, "oracle", 0).standard_normal((int(n_draws), family.m))
    numerator = (g @ (c * np.sqrt(eigenvalues))) ** 2
    denominator = (g ** 2) @ eigenvalues
    return np.clip(1.0 - numerator / denominator, 0.0, 1.0)


def sample_null_v_general(params, family: SubsetFamily, n_draws: int, seed: int,
                          prior: str = "sphere", radius: float = 1.0,
                          df: float = DEFAULT_STUDENT_DF) -> np.ndarray:
    """
    Null draws of V for any r and any of the gamma priors

    Each draw evaluates 1 - gamma' C_m' C_m gamma / gamma' C~_m gamma, with
    gamma from the named prior; draw i uses prior stream index i.
    """
    model = _model(params)
    c_mean, c_tilde = averaged_confounding(model, family)
    gammas = np.stack([sample_prior(prior, model.q, radius, seed, df=df, index=i)
                       for i in range(int(n_draws))])
    numerator = np.sum((gammas @ c_mean.T) ** 2, axis=1)
    denominator = np.sum((gammas @ c_tilde) * gammas, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = 1.0 - numerator / denominator
    return np.clip(values[denominator > 0], 0.0, 1.0)


def population_residual_cross_covariance(params: SemParams, conditioning_set: Sequence[int]) -> float:
    """
    Cov(R_Y, R_X) of the population residuals after projecting out W_C

        Cov(X, Y) - Cov(X, W_C) Var(W_C)^-1 Cov(W_C, Y)

    Args:
        params: SEM parameters with d = 1
        conditioning_set: Background indices C

    Returns:
        The residual cross-covariance
    """
    if params.d != 1:
        raise InvalidInputError(f"residual cross-covariance is defined here for d = 1, got d = {params.d}")
    cov = PopulationModel(params).full_covariance()
    x, y = 0, cov.shape[0] - 1
    cond = 1 + np.asarray(sorted(int(i) for i in conditioning_set), dtype=int)
    value = cov[x, y]
    if cond.size:
        factor = linalg.cho_factor(cov[np.ix_(cond, cond)])
        value -= float(cov[x, cond] @ linalg.cho_solve(factor, cov[cond, y]))
    return float(value)


def oracle_summary(params, family: SubsetFamily) -> Dict:
    """Diagnostics reported next to experiments"""
    model = _model(params)
    strength, sigma_strength = condition_strength(model, family)
    try:
        limit = limit_constant_null(model, family)
    except UndefinedLimitError:
        limit = float("nan")
    return {
        "condition_strength": strength,
        "condition_strength_sigma": sigma_strength,
        "limit_constant_null": limit,
    }
