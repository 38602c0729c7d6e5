"""Per-user linear bandit state and top-K list generation under UCB scoring.

The model keeps the inverse ridge covariance ``Minv`` and the feature
importance vector ``B``; the preference estimate is ``Minv @ B`` and an item
scores its estimated attraction plus ``c`` times its ``Minv``-weighted norm.
Latent feature spaces rank by a single scoring pass; topic and hybrid spaces
are ranked greedily because each position changes the coverage state that
defines the next position's features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FeatureSpace

# Quadratic forms x' Minv x more negative than this indicate a numerically
# broken inverse rather than rounding noise.
RADICAND_TOL = -1e-12


@dataclass
class BanditModel:
    """Ridge-regression bandit state for one user (or one shared model).

    Parameters
    ----------
    Minv : (d, d) array
        Inverse covariance, symmetric positive definite.
    B : (d,) array
        Accumulated feature importance weights.
    lam : float
        Ridge strength; a fresh model has ``Minv = I / lam``.
    c : float
        Exploration constant scaling the confidence width.
    """

    Minv: np.ndarray
    B: np.ndarray
    lam: float = 1.0
    c: float = 0.0

    @classmethod
    def fresh(cls, d: int, lam: float = 1.0, c: float = 0.0) -> "BanditModel":
        if lam <= 0:
            raise ValueError("lam must be > 0")
        if c < 0:
            raise ValueError("c must be >= 0")
        return cls(Minv=np.eye(d) / lam, B=np.zeros(d), lam=lam, c=c)

    @property
    def d(self) -> int:
        return self.B.shape[0]


@dataclass
class RankedList:
    """An ordered size-K recommendation with its selection-time scores.

    ``features`` snapshots the exact feature vector each position was scored
    with; prefix-dependent kinds need this cache for the reward update, since
    recomputing after the coverage state advanced would corrupt it.
    """

    user: int
    items: np.ndarray
    scores: np.ndarray
    round: int = 0
    features: np.ndarray | None = field(default=None, repr=False)

    @property
    def K(self) -> int:
        return len(self.items)


def theta_hat(model: BanditModel) -> np.ndarray:
    """Ridge estimate of the user preference vector, ``Minv @ B``."""
    return model.Minv @ model.B


def _quad_forms(Minv: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Row-wise ``x Minv x^T``, clamped against rounding noise below zero."""
    q = np.einsum("ij,ij->i", X @ Minv, X)
    low = q.min(initial=0.0)
    if low < RADICAND_TOL:
        raise FloatingPointError(
            f"negative UCB radicand {low:.3e}: inverse covariance is corrupted"
        )
    return np.clip(q, 0.0, None)


def ucb_scores(model: BanditModel, X: np.ndarray) -> np.ndarray:
    """Upper-confidence scores for every row of ``X``."""
    mean = X @ theta_hat(model)
    if model.c == 0.0:
        return mean
    return mean + model.c * np.sqrt(_quad_forms(model.Minv, X))


def ucb_score(model: BanditModel, x: np.ndarray) -> float:
    """Score one item: ``x . theta_hat + c sqrt(x Minv x^T)``."""
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("feature vector contains non-finite entries")
    return float(ucb_scores(model, x[None, :])[0])


def select_list(
    model: BanditModel,
    features: FeatureSpace,
    K: int,
    exclude: set[int] | frozenset[int] = frozenset(),
    user: int = 0,
    round_index: int = 0,
) -> RankedList:
    """Build the top-K list for one round.

    Latent kind: the K highest-scoring items, score-descending. Topic and
    hybrid kinds: greedy sequential choice — at each position every remaining
    candidate is rescored with its coverage-discounted feature, the argmax is
    appended, and the coverage state advances. All ties break toward the
    lowest item index.
    """
    m = features.m
    if K < 1:
        raise ValueError("K must be >= 1")
    if K > m - len(exclude):
        raise ValueError(f"cannot pick K={K} items from {m - len(exclude)} candidates")

    blocked = np.zeros(m, dtype=bool)
    if exclude:
        blocked[list(exclude)] = True

    if not features.prefix_dependent:
        scores = ucb_scores(model, features.X)
        masked = np.where(blocked, -np.inf, scores)
        # lexsort: primary key -score, secondary key item index ascending
        order = np.lexsort((np.arange(m), -masked))[:K]
        return RankedList(
            user=user,
            items=order.copy(),
            scores=scores[order].copy(),
            round=round_index,
            features=features.X[order].copy(),
        )

    covered = features.empty_coverage()
    items = np.empty(K, dtype=np.intp)
    picked_scores = np.empty(K)
    picked_features = np.empty((K, features.d))
    taken = blocked.copy()
    for pos in range(K):
        X_eff = features.effective(covered)
        scores = ucb_scores(model, X_eff)
        scores[taken] = -np.inf
        choice = int(np.argmax(scores))  # first occurrence == lowest index on ties
        items[pos] = choice
        picked_scores[pos] = scores[choice]
        picked_features[pos] = X_eff[choice]
        taken[choice] = True
        covered = features.advance(covered, choice)
    return RankedList(
        user=user,
        items=items,
        scores=picked_scores,
        round=round_index,
        features=picked_features,
    )
