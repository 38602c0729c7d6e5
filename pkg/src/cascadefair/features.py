"""Item feature construction and ground-truth user preference derivation.

Three feature kinds drive the rankers:

* ``latent``  — low-rank factors from a randomized truncated SVD of the
  binary interaction matrix (relevance-seeking ranking).
* ``topic``   — per-item genre distributions whose effective value at a list
  position is the marginal gain in topic coverage (diversity-seeking ranking).
* ``hybrid``  — concatenation of the two, with the latent half static and the
  topic half prefix-dependent.

Ground-truth preference vectors are a ridge fit of each user's held-out
binary relevance onto the item features, mirroring the estimator the bandit
itself uses.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import InteractionMatrix

KINDS = ("latent", "topic", "hybrid")


@dataclass
class FeatureSpace:
    """Per-item feature matrix plus optional per-user truth vectors.

    ``X`` holds base features (m x d). For the topic and hybrid kinds the
    feature actually scored at a list position depends on the topic coverage
    accumulated by the list prefix; :meth:`effective` materializes those
    prefix-dependent rows. ``user_truth`` (n x d) is only populated on spaces
    derived from test data.
    """

    X: np.ndarray
    kind: str
    d_latent: int = 0
    d_topic: int = 0
    user_truth: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        self.X = np.asarray(self.X, dtype=np.float64)
        if not np.isfinite(self.X).all():
            raise ValueError("feature matrix contains non-finite entries")
        if self.d_latent + self.d_topic != self.X.shape[1]:
            raise ValueError("d_latent + d_topic must equal the feature dimension")

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def prefix_dependent(self) -> bool:
        return self.d_topic > 0

    def topic_part(self) -> np.ndarray:
        """View of the topic columns (empty for latent spaces)."""
        return self.X[:, self.d_latent :]

    def empty_coverage(self) -> np.ndarray:
        return np.zeros(self.d_topic)

    def effective(self, covered: np.ndarray | None = None) -> np.ndarray:
        """Features of every item given the current topic coverage.

        Latent columns pass through unchanged; topic columns are discounted to
        the coverage gain ``(1 - covered_j) * x_ij``. With ``covered`` omitted
        or all-zero this is the base matrix.
        """
        if not self.prefix_dependent or covered is None or not covered.any():
            return self.X
        out = self.X.copy()
        out[:, self.d_latent :] *= 1.0 - covered
        return out

    def advance(self, covered: np.ndarray, item: int) -> np.ndarray:
        """Coverage after appending ``item`` to the list prefix."""
        return advance_coverage(covered, self.topic_part()[item])


def truncated_svd(
    matrix: InteractionMatrix,
    d: int,
    iterations: int = 2,
    seed: int = 0,
    oversample: int = 8,
) -> tuple[np.ndarray, np.ndarray]:
    """Rank-``d`` factorization of the binary relevance matrix.

    Randomized subspace iteration: project onto a Gaussian sketch, run
    ``iterations`` power steps with QR re-orthonormalization, then take the
    exact SVD of the small projected matrix. The singular values are split
    symmetrically, so ``user_factors @ item_factors.T`` approximates the
    relevance matrix directly.

    Returns
    -------
    (item_factors, user_factors)
        Arrays of shape (m, d) and (n, d). Deterministic given ``seed``.
    """
    n, m = matrix.relevance.shape
    if d < 1:
        raise ValueError("d must be >= 1")
    if d > min(n, m):
        raise ValueError(f"d={d} exceeds rank bound min(n, m)={min(n, m)}")

    A = matrix.relevance.astype(np.float64)
    rng = np.random.default_rng(seed)
    k = min(d + oversample, m)
    Y = A @ rng.standard_normal((m, k))
    Q, _ = np.linalg.qr(Y)
    for _ in range(iterations):
        Q, _ = np.linalg.qr(A.T @ Q)
        Q, _ = np.linalg.qr(A @ Q)
    B = (A.T @ Q).T  # k x m, dense even for sparse A
    U_small, s, Vt = np.linalg.svd(B, full_matrices=False)
    U = Q @ U_small

    # Fix the SVD sign ambiguity: largest-magnitude entry of each item factor
    # column is made positive.
    signs = np.sign(Vt[np.arange(Vt.shape[0]), np.argmax(np.abs(Vt), axis=1)])
    signs[signs == 0] = 1.0
    U *= signs
    Vt *= signs[:, None]

    root = np.sqrt(s[:d])
    item_factors = Vt[:d].T * root
    user_factors = U[:, :d] * root
    return item_factors, user_factors


def latent_features(
    matrix: InteractionMatrix, d: int, seed: int = 0, iterations: int = 2
) -> FeatureSpace:
    """SVD item factors wrapped as a latent :class:`FeatureSpace`."""
    item_factors, _ = truncated_svd(matrix, d, iterations=iterations, seed=seed)
    return FeatureSpace(item_factors, kind="latent", d_latent=d)


def topic_base_features(matrix: InteractionMatrix) -> FeatureSpace:
    """Per-item genre distributions, uniform over each item's genres.

    Row i has weight ``1/|genres_i|`` on each of the item's topic columns, so
    every row sums to one.
    """
    if not matrix.topic_index:
        raise ValueError("topic vocabulary is empty")
    d = len(matrix.topic_index)
    X = np.zeros((matrix.m, d))
    for i, genres in enumerate(matrix.item_genres):
        cols = [matrix.topic_index[g] for g in genres]
        X[i, cols] = 1.0 / len(cols)
    return FeatureSpace(X, kind="topic", d_topic=d)


def topic_gain(x_base: np.ndarray, covered: np.ndarray) -> np.ndarray:
    """Marginal increase in per-topic list coverage from appending an item.

    List coverage per topic follows the noisy-OR form ``1 - prod(1 - x)``, so
    appending an item with base weight ``x_j`` raises topic j's coverage by
    ``(1 - covered_j) * x_j``. The coverage state is not mutated.
    """
    return (1.0 - covered) * x_base


def advance_coverage(covered: np.ndarray, x_base: np.ndarray) -> np.ndarray:
    """Coverage state after appending an item: ``1 - (1 - covered)(1 - x)``."""
    return 1.0 - (1.0 - covered) * (1.0 - x_base)


def hybrid_features(latent: FeatureSpace, topic: FeatureSpace) -> FeatureSpace:
    """Concatenate latent and topic spaces over a shared item index.

    The latent half stays prefix-independent; the topic half is discounted by
    coverage at selection time exactly as in the pure topic space.
    """
    if latent.kind != "latent" or topic.kind != "topic":
        raise ValueError("expected a latent space and a topic space")
    if latent.m != topic.m:
        raise ValueError(
            f"item index mismatch: latent has {latent.m} items, topic has {topic.m}"
        )
    X = np.hstack([latent.X, topic.X])
    return FeatureSpace(X, kind="hybrid", d_latent=latent.d, d_topic=topic.d)


def derive_user_truth(
    test: InteractionMatrix, features: FeatureSpace, ridge: float = 1.0
) -> np.ndarray:
    """Ground-truth preference vectors from held-out relevance.

    Solves the ridge system ``(X^T X + ridge I) theta = X^T y_u`` per user,
    with ``y_u`` the user's binary test relevance over all items. Returns an
    (n, d) array; attraction probabilities ``x_i . theta_u`` are clipped to
    [0, 1] where they are consumed.
    """
    if ridge <= 0:
        raise ValueError("ridge must be > 0")
    X = features.X
    gram = X.T @ X + ridge * np.eye(features.d)
    targets = np.asarray((test.relevance @ X).T)  # d x n
    theta = np.linalg.solve(gram, targets)
    return np.ascontiguousarray(theta.T)


def attach_user_truth(
    features: FeatureSpace, test: InteractionMatrix, ridge: float = 1.0
) -> FeatureSpace:
    """Copy of ``features`` carrying theta* derived from ``test``."""
    return replace(features, user_truth=derive_user_truth(test, features, ridge))
