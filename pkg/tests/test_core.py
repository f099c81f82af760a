"""Tests for data types, the stability statistic, subset selection and RNG streams."""

import numpy as np
import pytest

from src.core.data import CoefficientSet, Dataset, SubsetFamily
from src.core.errors import InvalidInputError, InvalidSubsetError, UndefinedStatisticError
from src.core.rng import child_seed, permutation_stream, substream
from src.core.selection import partition_selection, random_selection
from src.core.stability import stability_statistic, stability_statistic_batch


class TestStabilityStatistic:
    def test_identical_vectors(self):
        assert stability_statistic([[1, 2], [1, 2], [1, 2]]) == 0.0

    def test_worked_example(self):
        assert stability_statistic([[1, 1], [1, -1], [1, 0]]) == pytest.approx(0.4, abs=1e-12)

    def test_scale_invariance(self):
        assert stability_statistic([[2, 2], [2, -2], [2, 0]]) == pytest.approx(0.4, abs=1e-12)
        v = np.array([[0.3, -1.2], [2.0, 0.1], [-0.7, 0.4]])
        assert stability_statistic(-3.5 * v) == pytest.approx(stability_statistic(v), abs=1e-12)

    def test_orthonormal_pair(self):
        assert stability_statistic([[1, 0], [0, 1]]) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("m", [2, 3, 5, 8])
    def test_orthogonal_equal_norms(self, m):
        assert stability_statistic(3.0 * np.eye(m)) == pytest.approx(1 - 1 / m, abs=1e-12)

    def test_order_invariance(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal((6, 3))
        assert stability_statistic(v[::-1]) == pytest.approx(stability_statistic(v), abs=1e-12)

    def test_single_vector_is_zero(self):
        assert stability_statistic([[1.5, -2.0]]) == 0.0

    def test_all_zero_is_undefined(self):
        with pytest.raises(UndefinedStatisticError):
            stability_statistic(np.zeros((3, 2)))

    def test_bounds(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            value = stability_statistic(rng.standard_normal((rng.integers(1, 8), 2)))
            assert 0.0 <= value <= 1.0

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(2)
        coeffs = rng.standard_normal((5, 2, 7))
        batch = stability_statistic_batch(coeffs)
        for b in range(7):
            assert batch[b] == pytest.approx(stability_statistic(coeffs[:, :, b]), abs=1e-12)

    def test_batch_marks_zero_replicates(self):
        coeffs = np.zeros((3, 1, 2))
        coeffs[:, 0, 1] = [1.0, 2.0, 3.0]
        batch = stability_statistic_batch(coeffs)
        assert np.isnan(batch[0])
        assert np.isfinite(batch[1])

    def test_coefficient_set_shape(self):
        coeffs = CoefficientSet([1.0, 2.0, 3.0])
        assert (coeffs.m, coeffs.d) == (3, 1)
        np.testing.assert_allclose(coeffs.mean(), [2.0])
        with pytest.raises(InvalidInputError):
            CoefficientSet([[1.0, np.nan]])


class TestRandomSelection:
    def test_contract(self):
        family = random_selection(5, 2, 3, seed=7)
        assert family.m == 3
        for subset in family:
            assert len(subset) == 2
            assert list(subset) == sorted(subset)
            assert all(0 <= i < 5 for i in subset)

    def test_two_choices(self):
        family = random_selection(2, 1, 4, seed=1)
        assert all(subset in ((0,), (1,)) for subset in family)

    def test_reproducible(self):
        assert random_selection(30, 4, 10, seed=5) == random_selection(30, 4, 10, seed=5)
        assert random_selection(30, 4, 10, seed=5) != random_selection(30, 4, 10, seed=6)

    def test_prefix_stable(self):
        short = random_selection(30, 4, 5, seed=9)
        longer = random_selection(30, 4, 12, seed=9)
        assert longer.subsets[:5] == short.subsets

    @pytest.mark.parametrize("k", [0, 5, 6])
    def test_invalid_size(self, k):
        with pytest.raises(InvalidSubsetError):
            random_selection(5, k, 3, seed=0)

    def test_inclusion_frequency(self):
        q, k, m = 10, 3, 20000
        family = random_selection(q, k, m, seed=123)
        counts = np.zeros(q)
        for subset in family:
            counts[list(subset)] += 1
        expected = m * k / q
        sd = np.sqrt(m * (k / q) * (1 - k / q))
        assert np.all(np.abs(counts - expected) < 4 * sd)


class TestPartitionSelection:
    def test_blocks(self):
        family = partition_selection(6, 2)
        assert family.subsets == [(0, 1), (2, 3), (4, 5)]
        assert family.union() == tuple(range(6))

    def test_full_block_rejected(self):
        with pytest.raises(InvalidSubsetError):
            partition_selection(4, 4)

    def test_divisibility(self):
        with pytest.raises(InvalidSubsetError):
            partition_selection(5, 2)


class TestSubsetFamily:
    def test_rejects_bad_subsets(self):
        with pytest.raises(InvalidSubsetError):
            SubsetFamily(4, [[]])
        with pytest.raises(InvalidSubsetError):
            SubsetFamily(4, [[1, 1]])
        with pytest.raises(InvalidSubsetError):
            SubsetFamily(4, [[0, 4]])
        with pytest.raises(InvalidSubsetError):
            SubsetFamily(4, [[0, 1, 2, 3]])
        with pytest.raises(InvalidSubsetError):
            SubsetFamily(4, [])

    def test_full_subset_when_allowed(self):
        assert SubsetFamily(3, [[0, 1, 2]], allow_full=True).m == 1

    def test_sorted_storage_and_complement(self):
        family = SubsetFamily(5, [[3, 0], [4]])
        assert family[0] == (0, 3)
        assert family.complement(0) == (1, 2, 4)

    def test_dict_round_trip(self):
        family = random_selection(12, 3, 4, seed=2)
        assert SubsetFamily.from_dict(family.to_dict()) == family

    def test_remap(self):
        family = SubsetFamily(3, [[0], [1, 2]])
        remapped = family.remap([2, 5, 7], 10)
        assert remapped.subsets == [(2,), (5, 7)]
        assert remapped.q == 10


class TestDataset:
    def test_vector_x_and_missing_w(self):
        data = Dataset([1.0, 2.0, 3.0], [0.1, 0.2, 0.3])
        assert (data.n_samples, data.d, data.q) == (3, 1, 0)

    def test_row_mismatch(self):
        with pytest.raises(InvalidInputError):
            Dataset([1.0, 2.0], np.ones((3, 1)))

    def test_non_finite(self):
        with pytest.raises(InvalidInputError):
            Dataset([1.0, np.inf], np.ones((2, 1)))

    def test_arrays_are_read_only(self):
        data = Dataset([1.0, 2.0], np.ones((2, 1)), np.ones((2, 2)))
        with pytest.raises(ValueError):
            data.y[0] = 5.0

    def test_select_background(self, regression_data):
        part = regression_data.select_background([4, 1])
        assert part.names_w == ["w4", "w1"]
        np.testing.assert_array_equal(part.w[:, 0], regression_data.w[:, 4])


class TestRandomStreams:
    def test_substream_reproducible(self):
        a = substream(3, "perm", 4).standard_normal(5)
        b = substream(3, "perm", 4).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_tags_and_indices_separate_streams(self):
        base = substream(3, "perm", 0).standard_normal(5)
        assert not np.array_equal(base, substream(3, "data", 0).standard_normal(5))
        assert not np.array_equal(base, substream(3, "perm", 1).standard_normal(5))

    def test_permutation_stream_independent_of_batching(self):
        together = permutation_stream(8, [0, 1, 2, 3], 20)
        apart = np.vstack([permutation_stream(8, [2, 3], 20), permutation_stream(8, [0, 1], 20)])
        np.testing.assert_array_equal(together[2:], apart[:2])
        np.testing.assert_array_equal(together[:2], apart[2:])
        for row in together:
            assert sorted(row) == list(range(20))

    def test_negative_seed_rejected(self):
        with pytest.raises(InvalidInputError):
            substream(-1, "perm")

    def test_child_seed_deterministic(self):
        assert child_seed(1, "rep", 2) == child_seed(1, "rep", 2)
        assert child_seed(1, "rep", 2) != child_seed(1, "rep", 3)
