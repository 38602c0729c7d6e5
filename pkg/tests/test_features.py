"""Feature construction: SVD factors, topic coverage, hybrid concat, theta*."""

import numpy as np
import pytest

from cascadefair import (
    FeatureSpace,
    advance_coverage,
    derive_user_truth,
    hybrid_features,
    latent_features,
    topic_base_features,
    topic_gain,
    truncated_svd,
)
from helpers import matrix_from_dense


def reconstruction_error(matrix, d, seed=0, norm=np.linalg.norm):
    item_f, user_f = truncated_svd(matrix, d, seed=seed)
    dense = matrix.relevance.toarray()
    return norm(user_f @ item_f.T - dense)


class TestTruncatedSvd:
    def test_rank_one_exact(self):
        # every user likes exactly item 0: A = ones(n) e0^T, recovered at d=1
        A = np.zeros((6, 4))
        A[:, 0] = 1.0
        err = reconstruction_error(matrix_from_dense(A), d=1, norm=np.abs)
        assert err.max() < 1e-6

    def test_identity_full_rank(self):
        err = reconstruction_error(matrix_from_dense(np.eye(4)), d=4, norm=np.abs)
        assert err.max() < 1e-8

    def test_error_monotone_in_d(self, small_split):
        train, _ = small_split
        e5 = reconstruction_error(train, d=5, seed=7)
        e10 = reconstruction_error(train, d=10, seed=7)
        assert e10 <= e5

    def test_deterministic(self, small_split):
        train, _ = small_split
        a = truncated_svd(train, 6, seed=3)
        b = truncated_svd(train, 6, seed=3)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_rank_bound_enforced(self):
        with pytest.raises(ValueError, match="rank bound"):
            truncated_svd(matrix_from_dense(np.eye(3)), d=4)
        with pytest.raises(ValueError):
            truncated_svd(matrix_from_dense(np.eye(3)), d=0)

    def test_shapes(self, small_split):
        train, _ = small_split
        item_f, user_f = truncated_svd(train, 6, seed=0)
        assert item_f.shape == (train.m, 6)
        assert user_f.shape == (train.n, 6)


class TestTopicFeatures:
    def matrix(self):
        genres = (
            frozenset({"Action"}),
            frozenset({"Action", "Comedy"}),
            frozenset({"Drama"}),
        )
        return matrix_from_dense(np.eye(3), genres=genres)

    def test_single_genre_one_hot(self):
        fs = topic_base_features(self.matrix())
        # topics sorted: Action, Comedy, Drama
        np.testing.assert_allclose(fs.X[0], [1.0, 0.0, 0.0])

    def test_two_genres_uniform(self):
        fs = topic_base_features(self.matrix())
        np.testing.assert_allclose(fs.X[1], [0.5, 0.5, 0.0])

    def test_rows_sum_to_one(self, small_split):
        train, _ = small_split
        fs = topic_base_features(train)
        np.testing.assert_allclose(fs.X.sum(axis=1), 1.0, atol=1e-12)
        assert fs.X.min() >= 0.0


def coverage_of(rows):
    """Oracle: per-topic list coverage 1 - prod(1 - x) over the rows."""
    rows = np.atleast_2d(rows)
    return 1.0 - np.prod(1.0 - rows, axis=0)


class TestTopicCoverage:
    def test_gain_on_empty_list(self):
        x = np.array([0.5, 0.5, 0.0])
        np.testing.assert_allclose(topic_gain(x, np.zeros(3)), x)

    def test_gain_saturated(self):
        x = np.array([0.5, 0.5, 0.0])
        np.testing.assert_allclose(topic_gain(x, np.ones(3)), 0.0)

    def test_gain_hand_value(self):
        x = np.array([0.5, 0.5, 0.0])
        covered = np.array([0.5, 0.0, 0.0])
        np.testing.assert_allclose(topic_gain(x, covered), [0.25, 0.5, 0.0])

    def test_gain_matches_coverage_difference_oracle(self, rng):
        for _ in range(50):
            prefix = rng.uniform(0, 1, size=(rng.integers(0, 4), 5))
            x = rng.dirichlet(np.ones(5))
            covered = coverage_of(prefix) if len(prefix) else np.zeros(5)
            expected = coverage_of(np.vstack([prefix, x[None]])) - covered
            np.testing.assert_allclose(topic_gain(x, covered), expected, atol=1e-12)

    def test_advance_certain(self):
        np.testing.assert_allclose(
            advance_coverage(np.zeros(2), np.array([1.0, 0.0])), [1.0, 0.0]
        )

    def test_advance_hand_value(self):
        got = advance_coverage(np.array([0.5, 0.0]), np.array([0.5, 0.0]))
        np.testing.assert_allclose(got, [0.75, 0.0])

    def test_advance_monotone(self, rng):
        covered = np.zeros(4)
        x = rng.uniform(0, 1, size=4)
        stepped = advance_coverage(covered, x)
        twice = advance_coverage(stepped, x)
        assert np.all(stepped >= covered)
        assert np.all(twice >= stepped)
        assert np.all(twice <= 1.0)

    def test_advance_order_independent(self, rng):
        rows = rng.uniform(0, 1, size=(4, 3))
        forward = np.zeros(3)
        for r in rows:
            forward = advance_coverage(forward, r)
        backward = np.zeros(3)
        for r in rows[::-1]:
            backward = advance_coverage(backward, r)
        np.testing.assert_allclose(forward, backward, atol=1e-12)

    def test_submodular_gains(self, rng):
        # prefix S subset of S': every item's gain can only shrink
        for _ in range(25):
            rows = rng.uniform(0, 1, size=(5, 4))
            small = coverage_of(rows[:2])
            large = coverage_of(rows[:4])
            item = rng.dirichlet(np.ones(4))
            assert np.all(topic_gain(item, large) <= topic_gain(item, small) + 1e-12)


class TestHybridFeatures:
    def test_concat_dimensions(self, small_split):
        train, _ = small_split
        latent = latent_features(train, 10, seed=1)
        topic = topic_base_features(train)
        hybrid = hybrid_features(latent, topic)
        assert hybrid.d == 10 + len(train.topic_index)
        assert hybrid.d_latent == 10
        assert hybrid.d_topic == len(train.topic_index)

    def test_empty_prefix_reduces_to_components(self, small_split):
        train, _ = small_split
        latent = latent_features(train, 6, seed=1)
        topic = topic_base_features(train)
        hybrid = hybrid_features(latent, topic)
        eff = hybrid.effective(hybrid.empty_coverage())
        np.testing.assert_array_equal(eff[:, :6], latent.X)
        np.testing.assert_array_equal(eff[:, 6:], topic.X)

    def test_saturated_prefix_zeroes_topic_half(self, small_split):
        train, _ = small_split
        latent = latent_features(train, 6, seed=1)
        topic = topic_base_features(train)
        hybrid = hybrid_features(latent, topic)
        eff = hybrid.effective(np.ones(hybrid.d_topic))
        np.testing.assert_allclose(eff[:, 6:], 0.0)
        np.testing.assert_array_equal(eff[:, :6], latent.X)

    def test_item_index_mismatch(self):
        latent = FeatureSpace(np.zeros((3, 2)), kind="latent", d_latent=2)
        topic = FeatureSpace(np.full((4, 2), 0.5), kind="topic", d_topic=2)
        with pytest.raises(ValueError, match="mismatch"):
            hybrid_features(latent, topic)


class TestUserTruth:
    def test_two_by_two_closed_form(self):
        # user likes the x=[1,0] item, dislikes the x=[0,1] item
        matrix = matrix_from_dense(np.array([[1.0, 0.0]]))
        fs = FeatureSpace(np.eye(2), kind="latent", d_latent=2)
        theta = derive_user_truth(matrix, fs, ridge=1e-9)
        np.testing.assert_allclose(theta[0], [1.0, 0.0], atol=1e-6)

    def test_heavy_ridge_shrinks_to_zero(self):
        matrix = matrix_from_dense(np.array([[1.0, 0.0]]))
        fs = FeatureSpace(np.eye(2), kind="latent", d_latent=2)
        theta = derive_user_truth(matrix, fs, ridge=1e12)
        np.testing.assert_allclose(theta, 0.0, atol=1e-9)

    def test_zero_relevance_gives_zero_vector(self):
        matrix = matrix_from_dense(np.array([[0.0, 0.0], [1.0, 0.0]]))
        fs = FeatureSpace(np.eye(2), kind="latent", d_latent=2)
        theta = derive_user_truth(matrix, fs, ridge=0.5)
        np.testing.assert_array_equal(theta[0], 0.0)

    def test_matches_per_user_dense_solve(self, small_split, rng):
        # oracle: assemble and solve each user's normal equations separately
        _, test = small_split
        fs = latent_features(test, 5, seed=2)
        theta = derive_user_truth(test, fs, ridge=1.0)
        dense = test.relevance.toarray()
        gram = fs.X.T @ fs.X + np.eye(5)
        for u in rng.integers(0, test.n, size=10):
            expected = np.linalg.solve(gram, fs.X.T @ dense[u])
            np.testing.assert_allclose(theta[u], expected, atol=1e-10)

    def test_ridge_must_be_positive(self, small_split):
        _, test = small_split
        fs = latent_features(test, 5, seed=2)
        with pytest.raises(ValueError):
            derive_user_truth(test, fs, ridge=0.0)
