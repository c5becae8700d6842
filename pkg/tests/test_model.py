import numpy as np
import pytest

from lcmgof import (
    GenConfig,
    LcmParams,
    ResponseMatrix,
    expected_response,
    generate_dataset,
    generate_memberships,
    generate_theta,
    response_variances,
    sample_responses,
)

from oracle_utils import binomial_moments


def small_params(memberships, theta, m=5):
    memberships = np.asarray(memberships)
    theta = np.asarray(theta, dtype=float)
    return LcmParams(
        n_subjects=memberships.size,
        n_items=theta.shape[0],
        n_classes=theta.shape[1],
        max_category=m,
        memberships=memberships,
        item_params=theta,
    )


class TestGenerateMemberships:
    def test_single_class_forces_all_ones(self):
        assert np.array_equal(generate_memberships(4, 1, seed=123), [1, 1, 1, 1])

    def test_more_classes_than_subjects_rejected(self):
        with pytest.raises(ValueError, match="n_subjects < n_classes"):
            generate_memberships(2, 3, seed=0)

    def test_uniform_proportions(self):
        # the underlying stream is checked with a large frequency oracle first
        draws = np.random.default_rng(7).integers(1, 4, size=10**6)
        freq = np.bincount(draws, minlength=4)[1:] / 10**6
        assert np.abs(freq - 1 / 3).max() < 0.005

        labels = generate_memberships(3000, 3, seed=7)
        proportions = np.bincount(labels, minlength=4)[1:] / 3000
        assert np.abs(proportions - 1 / 3).max() < 0.05

    def test_every_class_non_empty_even_when_tight(self):
        # N == K makes empty classes likely on a single draw, forcing resamples
        labels = generate_memberships(5, 5, seed=11)
        assert sorted(labels.tolist()) == [1, 2, 3, 4, 5]

    def test_reproducible(self):
        assert np.array_equal(
            generate_memberships(500, 4, seed=99), generate_memberships(500, 4, seed=99)
        )


class TestGenerateTheta:
    def test_degenerate_interval_at_half(self):
        theta = generate_theta(2, 2, GenConfig(delta=0.5, max_category=5, seed=3))
        assert np.all(theta == 2.5)

    def test_bounds_and_mean_moderate_grid(self):
        theta = generate_theta(60, 4, GenConfig(delta=0.2, max_category=5, seed=21))
        assert theta.min() >= 1.0 and theta.max() <= 4.0
        assert abs(theta.mean() - 2.5) < 0.1

    def test_moments_large_column(self):
        theta = generate_theta(1000, 1, GenConfig(delta=0.1, max_category=5, seed=6))
        assert theta.min() >= 0.5
        assert theta.max() <= 4.5
        assert abs(theta.mean() - 2.5) < 0.05

    def test_delta_validation(self):
        with pytest.raises(ValueError, match="delta"):
            GenConfig(delta=0.0)
        with pytest.raises(ValueError, match="delta"):
            GenConfig(delta=0.7)

    def test_bounds_hold_exactly_for_fuzzed_configs(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            delta = float(rng.uniform(0.01, 0.5))
            m = int(rng.integers(1, 9))
            theta = generate_theta(15, 3, GenConfig(delta=delta, max_category=m, seed=int(rng.integers(2**32))))
            assert np.all(theta / m >= delta - 1e-15)
            assert np.all(theta / m <= 1 - delta + 1e-15)


class TestExpectedResponse:
    def test_single_class_repeats_rows(self):
        params = small_params([1, 1, 1], [[2.0], [3.0]])
        means = expected_response(params)
        assert np.array_equal(means, np.tile([2.0, 3.0], (3, 1)))

    def test_direct_indexing_two_classes(self):
        params = small_params([1, 2], [[1.0, 4.0]])
        assert np.array_equal(expected_response(params), [[1.0], [4.0]])

    def test_matches_dense_product(self):
        rng = np.random.default_rng(5)
        memberships = np.array([1, 2, 3, 1, 2, 3])
        theta = rng.uniform(0, 5, size=(5, 3))
        params = small_params(memberships, theta)
        dense = params.classification_matrix() @ theta.T
        assert np.allclose(expected_response(params), dense, atol=0, rtol=0)


class TestSampleResponses:
    def test_degenerate_cells(self):
        params = small_params([1, 1], [[0.0], [5.0]])
        draws = sample_responses(params, seed=2).data
        assert np.all(draws[:, 0] == 0)
        assert np.all(draws[:, 1] == 5)

    def test_moments_match_binomial(self):
        # 1e5 draws of a single cell with mean 2.5 on a 0..5 scale
        params = small_params(np.ones(10**5, dtype=int), [[2.5]])
        values = sample_responses(params, seed=31).data[:, 0]
        mean, var, _ = binomial_moments(5, 0.5)
        assert abs(values.mean() - mean) < 0.02
        assert abs(values.var(ddof=1) - var) < 0.03

    def test_entries_integer_in_range(self):
        cfg = GenConfig(delta=0.3, max_category=4, seed=17)
        _, responses = generate_dataset(50, 12, 3, cfg)
        assert responses.data.dtype == np.int64
        assert responses.data.min() >= 0
        assert responses.data.max() <= 4

    def test_mean_of_many_replicates_tracks_expectation(self):
        cfg = GenConfig(delta=0.2, max_category=5, seed=8)
        params, _ = generate_dataset(600, 60, 3, cfg)
        means = expected_response(params)
        reps = 200
        total = np.zeros_like(means)
        for rep in range(reps):
            total += sample_responses(params, seed=1000 + rep).data
        # per-cell deviation scaled by its binomial standard error; with
        # 36000 cells the worst |z| stays below 5.5 sigma
        z = (total / reps - means) / np.sqrt(response_variances(params) / reps)
        assert np.abs(z).max() < 5.5

    def test_variance_of_many_replicates(self):
        params = small_params([1, 1, 2, 2], [[1.5, 3.5], [2.0, 4.0], [0.5, 2.5]])
        reps = 4000
        draws = np.stack(
            [sample_responses(params, seed=500 + rep).data for rep in range(reps)]
        )
        sample_var = draws.var(axis=0, ddof=1)
        for i in range(4):
            for j in range(3):
                prob = expected_response(params)[i, j] / 5
                _, var, mu4 = binomial_moments(5, prob)
                spread = np.sqrt((mu4 - var**2) / reps)
                assert abs(sample_var[i, j] - var) < 5 * spread

    def test_reproducible(self):
        cfg = GenConfig(delta=0.25, max_category=5, seed=77)
        _, first = generate_dataset(80, 10, 2, cfg)
        _, second = generate_dataset(80, 10, 2, cfg)
        assert np.array_equal(first.data, second.data)


class TestValidation:
    def test_membership_labels_range_checked(self):
        with pytest.raises(ValueError, match="labels"):
            small_params([1, 3], [[1.0, 2.0]])

    def test_empty_class_rejected(self):
        with pytest.raises(ValueError, match="at least one subject"):
            LcmParams(
                n_subjects=3,
                n_items=1,
                n_classes=2,
                max_category=5,
                memberships=np.array([1, 1, 1]),
                item_params=np.array([[1.0, 2.0]]),
            )

    def test_theta_range_checked(self):
        with pytest.raises(ValueError, match="item_params"):
            small_params([1, 2], [[1.0, 6.0]])

    def test_classification_matrix_one_hot(self):
        params = small_params([1, 2, 2, 1], [[1.0, 4.0]])
        z = params.classification_matrix()
        assert np.array_equal(z.sum(axis=1), np.ones(4))
        assert np.array_equal(z.T @ z, np.diag([2.0, 2.0]))

    def test_response_matrix_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="0, ..., max_category"):
            ResponseMatrix(data=np.array([[0, 6]]), max_category=5)

    def test_response_matrix_rejects_fractions(self):
        with pytest.raises(ValueError, match="integers"):
            ResponseMatrix(data=np.array([[0.5, 1.0]]), max_category=5)
