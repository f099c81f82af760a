"""Shared fixtures and data helpers."""

import numpy as np
import pytest

from src.core.data import Dataset
from src.sem.synth import SemParams, generate_sem_params, sample_dataset


def make_regression_data(n=80, d=1, q=6, beta=None, gamma=None, seed=0):
    """Unconfounded Y = X beta + W gamma + noise with independent columns."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    w = rng.standard_normal((n, q))
    beta = np.zeros(d) if beta is None else np.asarray(beta, dtype=float)
    gamma = rng.standard_normal(q) if gamma is None else np.asarray(gamma, dtype=float)
    y = x @ beta + w @ gamma + rng.standard_normal(n)
    return Dataset(y, x, w)


def make_r1_params(q=12, d=1, seed=0, unit_noise=True, beta=None):
    """Single-confounder SEM parameters with random loadings and noise scales."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((q, 1))
    b = rng.standard_normal((d, 1))
    gamma = rng.standard_normal(q)
    beta = np.zeros(d) if beta is None else beta
    if unit_noise:
        return SemParams(a, b, beta, gamma)
    return SemParams(a, b, beta, gamma,
                     sigma_z=rng.uniform(0.5, 2.0, 1),
                     sigma_w=rng.uniform(0.5, 2.0, q),
                     sigma_x=rng.uniform(0.5, 2.0, d))


@pytest.fixture
def small_params():
    return generate_sem_params(d=1, q=20, r=2, rho_beta=0.0, rho_gamma=2.0, seed=11)


@pytest.fixture
def small_data(small_params):
    return sample_dataset(small_params, 60, seed=3)


@pytest.fixture
def regression_data():
    return make_regression_data()
