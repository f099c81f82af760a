"""
Permutation Test Module

Tests H0: ||beta|| = 0 with the stability statistic V.

    V_0  = V(beta_hat(S_1), ..., beta_hat(S_m))          on the observed Y
    V_i  = same, on Y(pi_i) = W gamma_hat + (Y - W gamma_hat)^pi_i
    p    = (#{i : V_i <= V_0} + 1) / (M + 1)

A causal effect pulls every beta_hat(S_j) toward beta and shrinks V_0, so
small observed values are the evidence against H0.

Only the response changes between replicates, so each subset's design
[1, X, W_S] is factorized once and reduced to the d x l map that turns a
response into the X-block of its coefficients. A batch of replicates is then
a single matrix product.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.core.config import config
from src.core.data import Dataset, SubsetFamily
from src.core.errors import InvalidInputError, UndefinedStatisticError
from src.core.rng import permutation_stream
from src.core.stability import stability_statistic_batch
from src.regression.averaging import GammaEstimate
from src.regression.ols import QrFactor, subset_design, subset_names

logger = logging.getLogger(__name__)


class PermutationTestResult:
    """Observed statistic, null draws and the p-value of one permutation test"""

    def __init__(self,
                 v_observed: float,
                 v_null: np.ndarray,
                 p_value: float,
                 m: int,
                 n_permutations: int,
                 seed: int,
                 method: str = "rs"):
        self.v_observed = float(v_observed)
        self.v_null = np.asarray(v_null, dtype=float)
        self.p_value = float(p_value)
        self.m = int(m)
        self.n_permutations = int(n_permutations)
        self.seed = int(seed)
        self.method = method

    def recompute_p(self) -> float:
        return permutation_p_value(self.v_observed, self.v_null)

    def to_dict(self) -> Dict:
        return {
            "method": self.method,
            "v_observed": self.v_observed,
            "v_null": self.v_null.tolist(),
            "p_value": self.p_value,
            "m": self.m,
            "n_permutations": self.n_permutations,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'PermutationTestResult':
        return cls(data["v_observed"], data["v_null"], data["p_value"], data["m"],
                   data["n_permutations"], data["seed"], data.get("method", "rs"))

    def __repr__(self) -> str:
        return (f"PermutationTestResult(V0={self.v_observed:.4g}, p={self.p_value:.4g}, "
                f"m={self.m}, M={self.n_permutations})")


TAILS = ("lower", "upper")


def permutation_p_value(observed: float, null: np.ndarray, tail: str = "lower") -> float:
    """
    (#{null <= observed} + 1) / (M + 1), or with >= for tail="upper"

    Ties always count toward the replicates, never toward rejection.
    """
    null = np.asarray(null, dtype=float)
    if tail == "lower":
        hits = np.count_nonzero(null <= observed)
    elif tail == "upper":
        hits = np.count_nonzero(null >= observed)
    else:
        raise InvalidInputError(f"tail must be one of {TAILS}, got '{tail}'")
    return (int(hits) + 1) / (null.shape[0] + 1)


def _gamma_vector(gamma_hat: Union[GammaEstimate, np.ndarray], q: int) -> np.ndarray:
    gamma = gamma_hat.gamma_hat if isinstance(gamma_hat, GammaEstimate) else np.asarray(gamma_hat, dtype=float)
    gamma = np.atleast_1d(gamma)
    if gamma.shape != (q,):
        raise InvalidInputError(f"gamma estimate has length {gamma.shape[0]}, expected q={q}")
    return gamma


def permute_residual_response(y: np.ndarray, w: np.ndarray,
                              gamma_hat: Union[GammaEstimate, np.ndarray],
                              perm: np.ndarray) -> np.ndarray:
    """
    W gamma_hat + (Y - W gamma_hat) permuted by perm

    Args:
        y: Response, length l
        w: Background matrix, l x q
        gamma_hat: Estimate of gamma
        perm: Permutation of range(l)

    Returns:
        Pseudo-response of length l
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    perm = np.asarray(perm)
    if perm.shape != y.shape or not np.array_equal(np.sort(perm), np.arange(y.shape[0])):
        raise InvalidInputError(f"perm must be a permutation of range({y.shape[0]})")
    fitted = w @ _gamma_vector(gamma_hat, w.shape[1])
    # fixed points return y itself, not fitted + (y - fitted)
    return np.where(perm == np.arange(y.shape[0]), y, fitted + (y - fitted)[perm])


class SubsetProjectors:
    """Stacked X-block coefficient maps of every subset design, shape (m, d, l)"""

    def __init__(self, data: Dataset, family: SubsetFamily):
        if family.q != data.q:
            raise InvalidInputError(f"subset family lives in range({family.q}) but data has q={data.q}")
        d = data.d
        blocks = []
        for subset in family.subsets:
            if data.n_samples <= d + len(subset) + 1:
                raise InvalidInputError(
                    f"need more than d + |S| + 1 = {d + len(subset) + 1} rows, got {data.n_samples}")
            factor = QrFactor(subset_design(data, subset), subset_names(data, subset))
            blocks.append(factor.projector(slice(1, 1 + d)))
        self.m = family.m
        self.d = d
        self.stacked = np.stack(blocks).reshape(self.m * d, data.n_samples)

    def coefficients(self, responses: np.ndarray) -> np.ndarray:
        """(m, d, B) coefficients for an l x B matrix of responses"""
        return (self.stacked @ responses).reshape(self.m, self.d, responses.shape[1])

    def statistics(self, responses: np.ndarray) -> np.ndarray:
        return stability_statistic_batch(self.coefficients(responses))


class EnvironmentProjectors:
    """
    Per-environment coefficient maps over a pooled response

    Environment j owns a contiguous block of rows of the pooled data and is
    fitted on [1, X, W_{S_j}] restricted to those rows.
    """

    def __init__(self, environments: Sequence[Dataset], subsets: Sequence[Sequence[int]]):
        if len(environments) != len(subsets):
            raise InvalidInputError(f"{len(environments)} environments but {len(subsets)} subsets")
        if not environments:
            raise InvalidInputError("need at least one environment")
        self.d = environments[0].d
        self.m = len(environments)
        self.blocks = []
        start = 0
        for env, subset in zip(environments, subsets):
            if env.d != self.d:
                raise InvalidInputError("environments must share the candidate causes X")
            if env.n_samples <= self.d + len(subset) + 1:
                raise InvalidInputError(
                    f"environment with {env.n_samples} rows cannot fit d + |S| + 1 = {self.d + len(subset) + 1} coefficients")
            factor = QrFactor(subset_design(env, subset), subset_names(env, subset))
            stop = start + env.n_samples
            self.blocks.append((slice(start, stop), factor.projector(slice(1, 1 + self.d))))
            start = stop
        self.n_rows = start

    def coefficients(self, responses: np.ndarray) -> np.ndarray:
        return np.stack([proj @ responses[rows] for rows, proj in self.blocks])

    def statistics(self, responses: np.ndarray) -> np.ndarray:
        return stability_statistic_batch(self.coefficients(responses))


def permutation_test(data: Dataset,
                     family: SubsetFamily,
                     gamma_hat: Union[GammaEstimate, np.ndarray],
                     n_permutations: int,
                     seed: int,
                     workers: int = 1,
                     batch_size: Optional[int] = None,
                     method: str = "rs") -> PermutationTestResult:
    """
    Permutation test of H0: ||beta|| = 0 on the stability statistic

    Args:
        data: Observed dataset; W must contain exactly the columns the family indexes
        family: Background subsets S_1..S_m (reused in every replicate)
        gamma_hat: Nuisance estimate used to rebuild pseudo-responses
        n_permutations: M >= 1
        seed: Master seed; replicate i uses substream (seed, "perm", i)
        workers: Threads over replicate batches
        batch_size: Replicates per matrix product (config PERM_BATCH by default)
        method: Label stored in the result

    Returns:
        PermutationTestResult
    """
    gamma = _gamma_vector(gamma_hat, data.q)
    projectors = SubsetProjectors(data, family)
    return _run_permutations(projectors, data.y, data.w @ gamma, n_permutations, seed,
                             workers, batch_size, method)


def environment_permutation_test(environments: Sequence[Dataset],
                                 subsets: Sequence[Sequence[int]],
                                 gamma_hat: Union[GammaEstimate, np.ndarray],
                                 n_permutations: int,
                                 seed: int,
                                 workers: int = 1,
                                 batch_size: Optional[int] = None,
                                 method: str = "rs") -> PermutationTestResult:
    """
    Permutation test where each coefficient vector comes from its own environment

    Residuals are pooled over all environments and permuted jointly; each
    replicate refits environment j on its own rows with background W_{S_j}.

    Args:
        environments: Datasets sharing X and the pooled background columns
        subsets: Background columns S_j used in environment j
        gamma_hat: Nuisance estimate over the pooled background columns
        n_permutations: M >= 1
        seed: Master seed

    Returns:
        PermutationTestResult
    """
    projectors = EnvironmentProjectors(environments, subsets)
    y = np.concatenate([env.y for env in environments])
    w = np.vstack([env.w for env in environments])
    gamma = _gamma_vector(gamma_hat, w.shape[1])
    return _run_permutations(projectors, y, w @ gamma, n_permutations, seed, workers, batch_size, method)


def _run_permutations(projectors, y: np.ndarray, fitted: np.ndarray, n_permutations: int, seed: int,
                      workers: int, batch_size: Optional[int], method: str) -> PermutationTestResult:
    if n_permutations < 1:
        raise InvalidInputError(f"need at least one permutation, got {n_permutations}")
    batch_size = int(batch_size or config['PERM_BATCH'])

    v_observed = float(projectors.statistics(y[:, None])[0])
    if np.isnan(v_observed):
        raise UndefinedStatisticError("stability statistic is 0/0 on the observed data")

    residuals = y - fitted
    n = y.shape[0]

    def run_batch(indices: List[int]) -> np.ndarray:
        perms = permutation_stream(seed, indices, n)
        responses = np.where((perms == np.arange(n)).T, y[:, None],
                             fitted[:, None] + residuals[perms].T)
        values = projectors.statistics(responses)
        bad = np.flatnonzero(np.isnan(values))
        if bad.size:
            raise UndefinedStatisticError("stability statistic is 0/0", replicate=indices[int(bad[0])])
        return values

    batches = [list(range(start, min(start + batch_size, n_permutations)))
               for start in range(0, n_permutations, batch_size)]
    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_batch, batches))
    else:
        parts = [run_batch(b) for b in batches]
    v_null = np.concatenate(parts)

    p_value = permutation_p_value(v_observed, v_null)
    logger.debug("permutation test: V0=%.6g p=%.6g (m=%d, M=%d)", v_observed, p_value,
                 projectors.m, n_permutations)
    return PermutationTestResult(v_observed, v_null, p_value, projectors.m, n_permutations, seed, method)


def type1_bound_estimate(w: np.ndarray,
                         gamma: np.ndarray,
                         gamma_hat: Union[GammaEstimate, np.ndarray],
                         sigma_y: float,
                         n_permutations: int) -> float:
    """
    Excess type I error allowed by an imperfect nuisance estimate

        sqrt(M) * ||W (gamma - gamma_hat)|| / (2 sigma_y)
    """
    if sigma_y <= 0:
        raise InvalidInputError(f"sigma_y must be positive, got {sigma_y}")
    w = np.asarray(w, dtype=float)
    gap = np.asarray(gamma, dtype=float) - _gamma_vector(gamma_hat, w.shape[1])
    return float(np.sqrt(n_permutations) * np.linalg.norm(w @ gap) / (2.0 * sigma_y))
