"""
Acceptance-scale Monte Carlo studies

These take minutes each and only run with `pytest -m slow`.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from src.commands.ingest import ColumnSchema, load_csv, run_real_analysis
from src.core.config import config
from src.core.rng import child_seed
from src.core.selection import partition_selection
from src.core.stability import stability_statistic
from src.harness.config import ExperimentConfig
from src.harness.experiment import run_q_sweep, run_type1_power_experiment
from src.inference.baselines import double_residualization_test, freedman_lane_test
from src.oracle.population import confounding_matrix, limit_constant_null
from src.regression.ols import ols_inference_table
from src.sem.synth import SemParams, generate_sem_params, sample_dataset, sample_prior, sample_sphere

pytestmark = pytest.mark.slow


def partition_sweep_params(q: int, beta: float) -> SemParams:
    # ||a||^2 = 5 at every q, weak X loading b = 1/sqrt(q)
    a = sample_sphere(q, np.sqrt(5.0), seed=1)
    return SemParams(a[:, None], [[1.0 / np.sqrt(q)]], [beta], np.zeros(q))


def population_v_draws(q: int, beta: float, n_draws: int = 100, m: int = 20):
    """Median V and median ||mean beta_hat - beta|| over gamma draws for a partition into m blocks"""
    params = partition_sweep_params(q, beta)
    family = partition_selection(q, q // m)
    stack = np.stack([confounding_matrix(params, s).c_matrix for s in family])
    values, drifts = [], []
    for i in range(n_draws):
        gamma = sample_prior("gaussian", q, 1.0, seed=2, index=i)
        coeffs = params.beta + stack @ gamma
        values.append(stability_statistic(coeffs))
        drifts.append(float(np.linalg.norm(coeffs.mean(axis=0) - params.beta)))
    return float(np.median(values)), float(np.median(drifts)), limit_constant_null(params, family)


class TestPopulationDichotomy:
    qs = (100, 400, 1600)

    def test_null_approaches_limit_constant(self):
        median, _, limit = population_v_draws(1600, 0.0)
        assert abs(median - limit) < 0.15

    def test_alternative_vanishes_and_averages_out(self):
        results = [population_v_draws(q, 1.0) for q in self.qs]
        medians = [r[0] for r in results]
        drifts = [r[1] for r in results]
        assert medians[-1] < 0.1
        assert all(b <= a + 0.02 for a, b in zip(medians, medians[1:]))
        assert drifts[-1] < 0.25 * drifts[0]


class TestPermutationExactness:
    def test_oracle_gamma_is_exact(self):
        study = ExperimentConfig(q=20, r=2, n_samples=50, rho_beta=0.0, rho_gamma=2.0, m=20, k=5,
                                 n_permutations=99, reps=1000, alphas=[0.05, 0.01], methods=["rs-oracle"],
                                 threads=4, oracle_diagnostics=False)
        report = run_type1_power_experiment(study, progress=False)
        assert report.failures["type1"]["rs-oracle"] == 0
        assert 0.037 <= report.rejection_rate("type1", "rs-oracle", 0.05) <= 0.065
        assert 0.004 <= report.rejection_rate("type1", "rs-oracle", 0.01) <= 0.019


class TestBenchmark:
    def test_setting1(self):
        study = ExperimentConfig(q=300, r=5, n_samples=100, rho_beta=1.5, rho_gamma=10.0, m=200, k=10,
                                 n_permutations=199, reps=200, threads=4, oracle_diagnostics=False)
        report = run_type1_power_experiment(study, progress=False)
        assert report.failures == {"type1": {"rs": 0}, "power": {"rs": 0}}
        assert 0.01 <= report.rejection_rate("type1", "rs", 0.05) <= 0.10
        assert report.rejection_rate("power", "rs", 0.05) >= 0.55

    def test_power_grows_with_q(self):
        study = ExperimentConfig(d=3, q=50, n_samples=300, rho_gamma=2.5, m=40, k=3, n_permutations=199,
                                 reps=100, threads=4, oracle_diagnostics=False)
        reports = run_q_sweep(study, [50, 100, 200, 400], progress=False)
        power = [r.rejection_rate("power", "rs", 0.05) for r in reports]
        assert all(b >= a - 0.05 for a, b in zip(power, power[1:]))
        for report in reports:
            assert 0.01 <= report.rejection_rate("type1", "rs", 0.05) <= 0.10


class TestBaselineCalibration:
    @pytest.mark.parametrize("test", [freedman_lane_test, double_residualization_test])
    def test_unconfounded_null(self, test):
        params = generate_sem_params(1, 50, 5, 0.0, 10.0, seed=0)
        params = params.replace(a=np.zeros_like(params.a))

        def one_rep(rep: int) -> float:
            seed = child_seed(0, "rep", rep)
            return test(sample_dataset(params, 200, seed), n_permutations=199, seed=seed).p_value

        with ThreadPoolExecutor(max_workers=4) as pool:
            p = np.array(list(pool.map(one_rep, range(1000))))
        assert 0.03 <= np.mean(p <= 0.05) <= 0.07


college = pytest.mark.skipif(not os.path.exists(config['COLLEGE_CSV']),
                             reason=f"College Distance data not found at {config['COLLEGE_CSV']}")


@college
class TestCollegeDistance:
    def schema(self, **changes) -> ColumnSchema:
        base = dict(target="bytest", causes=["momcoll", "dadcoll", "dist"], environment="stwmfg80",
                    drop=["ed", "tuition"], min_env_size=70)
        base.update(changes)
        return ColumnSchema(**base)

    def test_environments(self):
        collection = load_csv(config['COLLEGE_CSV'], self.schema())
        assert len(collection) == 20
        assert collection.n_samples == 3908

    def test_ols_table(self):
        pooled = load_csv(config['COLLEGE_CSV'], self.schema(environment=None, min_env_size=1)).pooled()
        table = ols_inference_table(pooled)
        assert table.loc["dadcoll", "coef"] == pytest.approx(2.8857, abs=1e-3)
        assert table.loc["dadcoll", "std_err"] == pytest.approx(0.327, abs=5e-3)
        assert table.loc["dist", "coef"] == pytest.approx(-0.2674, abs=1e-3)

    def test_stability_p_values(self):
        collection = load_csv(config['COLLEGE_CSV'], self.schema())
        dist = [run_real_analysis(collection, ["dist"], 999, seed).p_value for seed in range(10)]
        parents = [run_real_analysis(collection, ["momcoll", "dadcoll"], 999, seed).p_value for seed in range(10)]
        assert sum(p > 0.5 for p in dist) >= 9
        assert sum(p < 0.05 for p in parents) >= 9
