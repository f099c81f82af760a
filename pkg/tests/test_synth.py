"""Tests for SEM parameter and dataset synthesis."""

import numpy as np
import pytest

from src.core.config import config
from src.core.errors import ConfigError, InvalidInputError
from src.sem.synth import (SemParams, generate_sem_params, sample_dataset, sample_gaussian_prior,
                           sample_prior, sample_sphere, sample_student_prior)


class TestPriors:
    @pytest.mark.parametrize("dim,radius", [(1, 2.0), (5, 1.5), (300, 10.0)])
    def test_sphere_norm_exact(self, dim, radius):
        assert np.linalg.norm(sample_sphere(dim, radius, seed=4)) == pytest.approx(radius, rel=1e-12)

    def test_zero_radius(self):
        np.testing.assert_array_equal(sample_sphere(4, 0.0, seed=1), np.zeros(4))

    def test_one_dimensional_sphere_is_sign(self):
        values = {float(sample_sphere(1, 2.0, seed=0, index=i)[0]) for i in range(40)}
        assert values == {-2.0, 2.0}

    def test_sphere_marginal_mean_zero(self):
        draws = np.array([sample_sphere(3, 1.0, seed=9, index=i) for i in range(4000)])
        # each coordinate of a uniform point on S^2 has variance 1/3
        assert np.all(np.abs(draws.mean(axis=0)) < 4 * np.sqrt(1 / 3 / 4000))
        np.testing.assert_allclose(draws.var(axis=0), 1 / 3, atol=0.03)

    def test_gaussian_prior_second_moment(self):
        draws = np.array([sample_gaussian_prior(50, 2.0, seed=1, index=i) for i in range(400)])
        assert np.mean(np.sum(draws ** 2, axis=1)) == pytest.approx(4.0, rel=0.05)

    def test_student_prior_norm_and_df(self):
        assert np.linalg.norm(sample_student_prior(20, 3.0, seed=2)) == pytest.approx(3.0, rel=1e-12)
        with pytest.raises(InvalidInputError):
            sample_student_prior(20, 3.0, seed=2, df=2.0)

    def test_one_dimensional_priors(self):
        student = {float(sample_student_prior(1, 3.0, seed=0, index=i)[0]) for i in range(40)}
        assert student == {-3.0, 3.0}
        gaussian = sample_gaussian_prior(1, 2.0, seed=0)
        assert gaussian.shape == (1,)
        assert np.isfinite(gaussian[0])

    def test_student_direction_is_spikier_than_sphere(self):
        def median_peak(sampler):
            draws = [sampler(500, 1.0, seed=3, index=i) for i in range(200)]
            return np.median([np.max(np.abs(v)) for v in draws])

        assert median_peak(sample_student_prior) > median_peak(sample_sphere)

    def test_gaussian_prior_covariance(self):
        draws = np.array([sample_gaussian_prior(4, 2.0, seed=6, index=i) for i in range(10000)])
        cov = np.cov(draws, rowvar=False)
        # entry variance 1, so each covariance estimate has standard error about 1/sqrt(10^4)
        np.testing.assert_allclose(cov, np.eye(4), atol=5 * np.sqrt(2) / 100)

    def test_unknown_prior(self):
        with pytest.raises(InvalidInputError):
            sample_prior("laplace", 3, 1.0, seed=0)

    def test_negative_radius(self):
        with pytest.raises(InvalidInputError):
            sample_sphere(3, -1.0, seed=0)


class TestGenerateParams:
    def test_shapes_and_radii(self):
        params = generate_sem_params(d=2, q=30, r=5, rho_beta=1.5, rho_gamma=10.0, seed=3)
        assert params.a.shape == (30, 5)
        assert params.b.shape == (2, 5)
        assert params.rho_beta == pytest.approx(1.5)
        assert params.rho_gamma == pytest.approx(10.0)
        np.testing.assert_array_equal(params.sigma_w, np.ones(30))

    def test_deterministic(self):
        a = generate_sem_params(1, 10, 2, 1.0, 1.0, seed=5)
        b = generate_sem_params(1, 10, 2, 1.0, 1.0, seed=5)
        assert a.to_dict() == b.to_dict()

    def test_zero_beta(self):
        params = generate_sem_params(3, 10, 2, 0.0, 1.0, seed=5)
        np.testing.assert_array_equal(params.beta, np.zeros(3))

    def test_invalid_dims(self):
        with pytest.raises(InvalidInputError):
            generate_sem_params(0, 10, 2, 1.0, 1.0)

    def test_entry_variances(self):
        params = generate_sem_params(1, 400, 50, 0.0, 1.0, seed=8)
        # A ~ N(0, 1/q) and B ~ N(0, 1/d) by default
        assert np.var(params.a) * 400 == pytest.approx(1.0, rel=0.05)
        assert np.var(params.b) == pytest.approx(1.0, rel=0.6)

    def test_entry_variance_pairing_configurable(self, monkeypatch):
        monkeypatch.setitem(config, "A_VARIANCE_DIM", "d")
        monkeypatch.setitem(config, "B_VARIANCE_DIM", "q")
        params = generate_sem_params(2, 400, 50, 0.0, 1.0, seed=8)
        assert np.var(params.a) * 2 == pytest.approx(1.0, rel=0.05)
        assert np.var(params.b) * 400 == pytest.approx(1.0, rel=0.5)

    def test_explicit_entry_variances(self):
        params = generate_sem_params(1, 400, 50, 0.0, 1.0, seed=8, a_variance=4.0, b_variance=0.0)
        assert np.var(params.a) == pytest.approx(4.0, rel=0.05)
        np.testing.assert_array_equal(params.b, np.zeros((1, 50)))


class TestSemParams:
    def test_shape_validation(self):
        with pytest.raises(InvalidInputError):
            SemParams(np.ones((4, 2)), np.ones((1, 3)), [0.0], np.zeros(4))
        with pytest.raises(InvalidInputError):
            SemParams(np.ones((4, 2)), np.ones((1, 2)), [0.0], np.zeros(3))
        with pytest.raises(InvalidInputError):
            SemParams(np.ones((4, 2)), np.ones((1, 2)), [0.0], np.zeros(4), sigma_w=0.0)

    def test_replace(self, small_params):
        null = small_params.replace(beta=np.zeros(1))
        assert null.rho_beta == 0.0
        np.testing.assert_array_equal(null.gamma, small_params.gamma)

    def test_json_round_trip(self, small_params, tmp_path):
        path = tmp_path / "params.json"
        small_params.save(str(path))
        loaded = SemParams.load(str(path))
        assert loaded.to_dict() == small_params.to_dict()

    def test_load_rejects_bad_files(self, tmp_path):
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        with pytest.raises(ConfigError):
            SemParams.load(str(broken))
        missing = tmp_path / "missing.json"
        missing.write_text('{"a": [[1.0]], "b": [[1.0]], "beta": [0.0]}')
        with pytest.raises(ConfigError):
            SemParams.load(str(missing))

    def test_default_sigmas_filled(self):
        params = SemParams(np.ones((3, 2)), np.ones((1, 2)), [0.5], np.zeros(3), sigma_x=2.0)
        np.testing.assert_array_equal(params.sigma_w, np.ones(3))
        np.testing.assert_array_equal(params.sigma_x, [2.0])
        assert params.to_dict()["sigma_z"] == [1.0, 1.0]


class TestSampleDataset:
    def test_shapes(self, small_params):
        data = sample_dataset(small_params, 25, seed=1)
        assert (data.n_samples, data.d, data.q) == (25, 1, 20)

    def test_bit_reproducible(self, small_params):
        a = sample_dataset(small_params, 30, seed=2, index=4)
        b = sample_dataset(small_params, 30, seed=2, index=4)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.w, b.w)

    def test_beta_only_changes_y(self, small_params):
        null = sample_dataset(small_params, 30, seed=2)
        alt = sample_dataset(small_params.replace(beta=np.array([2.0])), 30, seed=2)
        np.testing.assert_array_equal(null.x, alt.x)
        np.testing.assert_array_equal(null.w, alt.w)
        np.testing.assert_allclose(alt.y - null.y, 2.0 * null.x[:, 0], atol=1e-12)

    def test_structural_equations(self):
        params = SemParams(np.zeros((3, 1)), np.zeros((1, 1)), [1.0], [1.0, -1.0, 0.5], sigma_y=1e-9)
        data = sample_dataset(params, 200, seed=0)
        np.testing.assert_allclose(data.y, data.x[:, 0] + data.w @ params.gamma, atol=1e-6)

    def test_empirical_covariance(self):
        params = SemParams([[1.0], [0.5]], [[2.0]], [0.0], [0.0, 0.0])
        data = sample_dataset(params, 40000, seed=6)
        # Cov(X, W_0) = b a_0 = 2
        assert np.cov(data.x[:, 0], data.w[:, 0])[0, 1] == pytest.approx(2.0, abs=0.1)

    def test_needs_rows(self, small_params):
        with pytest.raises(InvalidInputError):
            sample_dataset(small_params, 0, seed=1)
