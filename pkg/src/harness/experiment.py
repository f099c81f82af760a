"""
Experiment Runner Module

Type I error / power studies in the style of the synthetic benchmark:

1. draw SEM parameters once (A, B, gamma and the power-arm beta are frozen),
2. for rep i, derive a rep seed from substream (seed, "rep", i) and sample a
   dataset per arm; both arms share the rep seed so they differ only through beta,
3. run every requested method on the visible W columns and keep its p-value.

Reps run on a thread pool and are gathered by index, so the report does not
depend on the number of workers. A rep that raises a library error is
quarantined: its p-value is NaN and it is counted as a failure.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.core.data import Dataset, SubsetFamily
from src.core.errors import ConfigError, StabilityError
from src.core.rng import child_seed
from src.core.selection import random_selection
from src.harness.config import RS_METHODS, UNAVAILABLE_METHODS, ExperimentConfig
from src.harness.report import ARMS, ExperimentReport
from src.inference.baselines import double_residualization_test, freedman_lane_test
from src.inference.permtest import PermutationTestResult, permutation_test, type1_bound_estimate
from src.oracle.population import oracle_summary, sample_null_v_general
from src.regression.averaging import GammaEstimate, model_average_gamma
from src.sem.synth import SemParams, generate_sem_params, sample_dataset

logger = logging.getLogger(__name__)

_WEIGHTS = {"rs": "uniform", "rs-aic": "aic", "rs-bic": "bic"}


def _visible_data(data: Dataset, config: ExperimentConfig) -> Tuple[Dataset, Tuple[int, ...]]:
    if data.q != config.q:
        raise ConfigError(f"config describes q={config.q} background columns, data has {data.q}")
    visible = config.visible_columns()
    if not visible:
        raise ConfigError("every background column is hidden; random selection has an empty pool")
    if config.k >= len(visible):
        raise ConfigError(f"subset size k={config.k} must be smaller than the {len(visible)} visible columns")
    return data.select_background(visible), visible


def rs_test(data: Dataset,
            m: int,
            k: int,
            n_permutations: int,
            seed: int,
            weights: str = "uniform",
            gamma: Optional[np.ndarray] = None,
            workers: int = 1) -> Tuple[PermutationTestResult, GammaEstimate, SubsetFamily]:
    """
    Random selection, model averaging and the permutation test on one dataset

    Args:
        data: Dataset whose W holds only the columns the method may see
        m, k: Number and size of random subsets
        n_permutations: M
        seed: Seed for subsets and permutations
        weights: "uniform", "aic" or "bic" model-averaging weights
        gamma: True gamma of the visible columns; when given it replaces the estimate
        workers: Threads for submodel fits and permutation batches

    Returns:
        (test result, gamma estimate, subset family)
    """
    family = random_selection(data.q, k, m, seed)
    if gamma is not None:
        estimate = GammaEstimate.oracle(gamma)
    else:
        estimate = model_average_gamma(data.y, data.w, family, weights=weights, workers=workers)
    method = {"uniform": "rs", "aic": "rs-aic", "bic": "rs-bic"}[weights] if gamma is None else "rs-oracle"
    result = permutation_test(data, family, estimate, n_permutations, seed, workers=workers, method=method)
    return result, estimate, family


def run_rs_pipeline(data: Dataset, config: ExperimentConfig, seed: Optional[int] = None,
                    workers: int = 1) -> float:
    """
    RS p-value of one dataset under an experiment config

    Hidden columns are dropped before subsets are drawn.

    Args:
        data: Dataset with all q background columns
        config: Experiment config (m, k, M and hidden mask are used)
        seed: Overrides config.seed
        workers: Threads inside the test

    Returns:
        p-value
    """
    visible_data, _ = _visible_data(data, config)
    seed = config.seed if seed is None else seed
    result, _, _ = rs_test(visible_data, config.m, config.k, config.n_permutations, seed, workers=workers)
    return result.p_value


def _run_method(method: str, data: Dataset, config: ExperimentConfig, gamma_visible: np.ndarray,
                seed: int) -> Tuple[float, Optional[float]]:
    """(p-value, type I bound estimate or None) of one method on one visible dataset"""
    if method in RS_METHODS:
        if method == "rs-oracle":
            result, estimate, _ = rs_test(data, config.m, config.k, config.n_permutations, seed,
                                          gamma=gamma_visible)
        else:
            result, estimate, _ = rs_test(data, config.m, config.k, config.n_permutations, seed,
                                          weights=_WEIGHTS[method])
        bound = type1_bound_estimate(data.w, gamma_visible, estimate, 1.0, config.n_permutations)
        return result.p_value, bound
    if method == "fl":
        return freedman_lane_test(data, config.ridge_penalty, config.n_permutations, seed).p_value, None
    if method == "dr":
        return double_residualization_test(data, config.ridge_penalty, config.n_permutations, seed).p_value, None
    raise ConfigError(f"method '{method}' is not available")


def _run_rep(rep: int, arms: Dict[str, SemParams], config: ExperimentConfig,
             methods: Sequence[str]) -> Dict:
    rep_seed = child_seed(config.seed, "rep", rep)
    visible = list(config.visible_columns())
    out = {"p": {}, "bound": [], "errors": []}
    for arm, params in arms.items():
        data = sample_dataset(params, config.n_samples, rep_seed).select_background(visible)
        gamma_visible = params.gamma[visible]
        out["p"][arm] = {}
        for method in methods:
            try:
                p, bound = _run_method(method, data, config, gamma_visible, rep_seed)
            except StabilityError as e:
                logger.warning("rep %d, %s arm, method %s failed: %s", rep, arm, method, e)
                out["errors"].append((arm, method, str(e)))
                p, bound = float("nan"), None
            out["p"][arm][method] = p
            # the oracle arm has gamma_hat = gamma, so only estimated nuisances give a bound
            if bound is not None and arm == "type1" and method in ("rs", "rs-aic", "rs-bic"):
                out["bound"].append(bound)
    return out


def _diagnostics(params: SemParams, config: ExperimentConfig) -> Dict[str, float]:
    """Oracle diagnostics on the rep-0 subset family, mapped back to all q columns"""
    visible = config.visible_columns()
    family = random_selection(len(visible), config.k, config.m, child_seed(config.seed, "rep", 0))
    return oracle_summary(params, family.remap(visible, config.q))


def run_type1_power_experiment(config: ExperimentConfig, progress: bool = True) -> ExperimentReport:
    """
    Rejection rates of every requested method under the null and the alternative

    The null arm uses beta = 0 and the power arm a beta of norm rho_beta,
    both with the same frozen A, B and gamma. When rho_beta is 0 only the
    null arm runs.

    Args:
        config: Experiment config
        progress: Show a progress bar over reps

    Returns:
        ExperimentReport
    """
    start = time.perf_counter()
    if not config.visible_columns():
        raise ConfigError("every background column is hidden; random selection has an empty pool")
    if config.k >= len(config.visible_columns()):
        raise ConfigError(f"subset size k={config.k} must be smaller than the "
                          f"{len(config.visible_columns())} visible columns")
    params = generate_sem_params(config.d, config.q, config.r, config.rho_beta, config.rho_gamma,
                                 prior_kind=config.beta_prior, seed=config.seed,
                                 gamma_prior_kind=config.gamma_prior, df=config.student_df)
    arms = {"type1": params.replace(beta=np.zeros(config.d))}
    if config.rho_beta > 0:
        arms["power"] = params

    unavailable = [m for m in config.methods if m in UNAVAILABLE_METHODS]
    for method in unavailable:
        logger.warning("method %s is an external procedure and is reported as unavailable", method)
    methods = [m for m in config.methods if m not in UNAVAILABLE_METHODS]

    def job(rep: int) -> Dict:
        return _run_rep(rep, arms, config, methods)

    reps = range(config.reps)
    bar = dict(total=config.reps, desc=f"{config.setting_label()} q={config.q}",
               disable=None if progress else True)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(tqdm(pool.map(job, reps), **bar))
    else:
        outcomes = [job(rep) for rep in tqdm(reps, **bar)]

    p_values = {arm: {method: [o["p"][arm][method] for o in outcomes] for method in methods}
                for arm in ARMS if arm in arms}
    failures = {arm: {method: int(sum(np.isnan(p_values[arm][method]))) for method in methods}
                for arm in p_values}

    diagnostics: Dict[str, float] = {}
    if config.oracle_diagnostics:
        try:
            diagnostics.update(_diagnostics(params, config))
        except StabilityError as e:
            logger.warning("oracle diagnostics unavailable: %s", e)
    bounds = [b for o in outcomes for b in o["bound"]]
    if bounds:
        diagnostics["type1_bound_estimate"] = float(np.mean(bounds))

    report = ExperimentReport(config.model_dump(), config.setting_label(), p_values, failures,
                              unavailable, diagnostics, time.perf_counter() - start)
    logger.info("finished %r in %.1fs", report, report.wall_clock)
    return report


def run_parameter_sweep(config: ExperimentConfig, field: str, values: Sequence,
                        progress: bool = True) -> List[ExperimentReport]:
    """
    Repeat the experiment with one config field set to each value in turn

    Args:
        config: Base config
        field: ExperimentConfig field to vary, e.g. "q", "rho_beta" or "hidden_fraction"
        values: Values for the field
        progress: Show progress bars

    Returns:
        One report per value, in order
    """
    if field not in ExperimentConfig.model_fields:
        raise ConfigError(f"'{field}' is not an experiment config field")
    if not values:
        raise ConfigError("parameter sweep needs at least one value")
    reports = []
    for value in values:
        logger.info("sweep: %s = %s", field, value)
        reports.append(run_type1_power_experiment(config.updated(**{field: value}), progress=progress))
    return reports


def run_q_sweep(config: ExperimentConfig, q_list: Sequence[int], progress: bool = True) -> List[ExperimentReport]:
    """
    Power and type I error as the number of background features grows

    Args:
        config: Base config; its q is replaced by each entry of q_list
        q_list: Strictly increasing background dimensions

    Returns:
        One report per q
    """
    q_list = [int(q) for q in q_list]
    if any(b <= a for a, b in zip(q_list, q_list[1:])):
        raise ConfigError(f"q_list must be strictly increasing, got {q_list}")
    return run_parameter_sweep(config, "q", q_list, progress=progress)


def null_v_distribution(config: ExperimentConfig, n_draws: int = 1000,
                        quantiles: Sequence[float] = (0.05, 0.25, 0.5, 0.75, 0.95)) -> Dict:
    """
    Permutation null of V on one null dataset next to the population null

    The population null draws gamma from the config's gamma prior and
    evaluates V of the population coefficients on the rep-0 subset family.

    Returns:
        Dict with the quantile levels, both sets of quantiles and the observed V
    """
    params = generate_sem_params(config.d, config.q, config.r, 0.0, config.rho_gamma,
                                 prior_kind=config.beta_prior, seed=config.seed,
                                 gamma_prior_kind=config.gamma_prior, df=config.student_df)
    rep_seed = child_seed(config.seed, "rep", 0)
    data, visible = _visible_data(sample_dataset(params, config.n_samples, rep_seed), config)
    result, _, family = rs_test(data, config.m, config.k, config.n_permutations, rep_seed,
                                gamma=params.gamma[list(visible)])
    population = sample_null_v_general(params, family.remap(visible, config.q), n_draws, config.seed,
                                       prior=config.gamma_prior, radius=config.rho_gamma,
                                       df=config.student_df)
    levels = [float(v) for v in quantiles]
    return {
        "quantiles": levels,
        "permutation": np.quantile(result.v_null, levels).tolist(),
        "population": np.quantile(population, levels).tolist(),
        "v_observed": result.v_observed,
    }
