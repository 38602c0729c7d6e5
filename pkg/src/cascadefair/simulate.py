"""The interaction loop: pick a user, rank, simulate a cascade click, update.

A :class:`SimWorld` bundles everything derived from the data split — train
features for ranking, test features carrying the ground-truth preference
vectors, and the per-concern random streams. Separate streams for user
arrivals, clicks, and SVD sketches mean two runs with the same seed see the
same user schedule even when their policies diverge, which is what makes
paired significance testing across reward models possible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .bandit import BanditModel, RankedList, select_list
from .data import InteractionMatrix
from .features import (
    FeatureSpace,
    attach_user_truth,
    hybrid_features,
    latent_features,
    topic_base_features,
)
from .reward import Feedback, update_exposure_aware, update_standard

ALGORITHMS = ("lsb", "linucb", "hybrid")
REWARD_MODELS = ("standard", "exposure_aware")
ALGO_KIND = {"lsb": "topic", "linucb": "latent", "hybrid": "hybrid"}


@dataclass
class SimConfig:
    """Knobs for one simulation cell."""

    T: int
    K: int
    c: float = 0.0
    gamma: float = 5e-5
    lam: float = 1.0
    seed: int = 0
    algorithm: str = "linucb"
    reward_model: str = "standard"
    shared_model: bool = False
    d_latent: int = 10

    def __post_init__(self) -> None:
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.c < 0:
            raise ValueError("c must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.lam <= 0:
            raise ValueError("lambda must be > 0")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.reward_model not in REWARD_MODELS:
            raise ValueError(f"reward_model must be one of {REWARD_MODELS}")


@dataclass(frozen=True)
class RoundLog:
    """One round's record, sufficient to re-derive every exposure metric."""

    round: int
    user: int
    items: tuple[int, ...]
    click_index: int | None
    examined_count: int

    def __post_init__(self) -> None:
        expected = len(self.items) if self.click_index is None else self.click_index
        if self.examined_count != expected:
            raise ValueError("examined_count inconsistent with click_index")


@dataclass
class SimWorld:
    """Feature spaces, ground truth, and random streams for one (algorithm, seed)."""

    algorithm: str
    seed: int
    train_features: FeatureSpace
    test_features: FeatureSpace
    users: np.ndarray
    user_stream: np.random.SeedSequence
    click_stream: np.random.SeedSequence

    @property
    def n_items(self) -> int:
        return self.train_features.m


def _build_kind(
    matrix: InteractionMatrix, kind: str, d_latent: int, svd_seed: int
) -> FeatureSpace:
    if kind == "topic":
        return topic_base_features(matrix)
    if kind == "latent":
        return latent_features(matrix, d_latent, seed=svd_seed)
    return hybrid_features(
        latent_features(matrix, d_latent, seed=svd_seed), topic_base_features(matrix)
    )


def build_world(
    train: InteractionMatrix,
    test: InteractionMatrix,
    algorithm: str,
    d_latent: int = 10,
    lam: float = 1.0,
    seed: int = 0,
) -> SimWorld:
    """Construct the simulation environment for one algorithm and seed.

    Train and test feature spaces use the algorithm's own kind; the test
    space additionally carries theta* fit by ridge regression (strength
    ``lam``) on the held-out relevance. The four derived random streams
    (train SVD, test SVD, user arrivals, clicks) are spawned in a fixed
    order from ``seed``.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}")
    if train.user_ids != test.user_ids or train.item_ids != test.item_ids:
        raise ValueError("train and test matrices must share index maps")
    root = np.random.SeedSequence(seed)
    svd_train, svd_test, user_stream, click_stream = root.spawn(4)
    kind = ALGO_KIND[algorithm]

    def svd_seed(stream: np.random.SeedSequence) -> int:
        return int(stream.generate_state(1, dtype=np.uint64)[0])

    train_fs = _build_kind(train, kind, d_latent, svd_seed(svd_train))
    test_fs = _build_kind(test, kind, d_latent, svd_seed(svd_test))
    test_fs = attach_user_truth(test_fs, test, ridge=lam)
    return SimWorld(
        algorithm=algorithm,
        seed=seed,
        train_features=train_fs,
        test_features=test_fs,
        users=np.arange(train.n),
        user_stream=user_stream,
        click_stream=click_stream,
    )


def simulate_click(
    ranked: RankedList,
    theta_star: np.ndarray,
    test_features: FeatureSpace,
    rng: np.random.Generator,
) -> int | None:
    """Cascade scan: first Bernoulli success wins, nothing below it is seen.

    The attraction probability of the item at each position is its test
    feature dotted with theta*, clipped to [0, 1]. Returns the 1-based click
    position, or None when the whole list is scanned without a click.
    """
    probs = np.clip(test_features.X[ranked.items] @ theta_star, 0.0, 1.0)
    for k, p in enumerate(probs, start=1):
        if rng.random() < p:
            return k
    return None


def optimal_list(
    user: int, test_features: FeatureSpace, theta_star: np.ndarray, K: int
) -> RankedList:
    """Reference ranking: greedy selection under theta* with exploration off.

    Depends only on the ground truth, never on learned state. With ``Minv`` at
    identity and ``B = theta*`` the model's estimate is exactly theta*, and
    ``c = 0`` removes the confidence term.
    """
    d = test_features.d
    oracle = BanditModel(Minv=np.eye(d), B=np.asarray(theta_star, dtype=np.float64), c=0.0)
    ranked = select_list(oracle, test_features, K, user=user)
    return ranked


def run(config: SimConfig, world: SimWorld) -> Iterator[RoundLog]:
    """Drive ``config.T`` rounds over ``world``, yielding one log per round.

    Each round draws a user uniformly at random, ranks with that user's model
    (or the shared one), simulates a cascade click against the ground truth,
    and applies the configured reward update. Fully deterministic given the
    world's seed.
    """
    if config.algorithm != world.algorithm:
        raise ValueError(
            f"config algorithm {config.algorithm!r} does not match world {world.algorithm!r}"
        )
    if config.K > world.n_items:
        raise ValueError("K exceeds the number of items")
    truth = world.test_features.user_truth
    if truth is None:
        raise ValueError("world's test features carry no user truth vectors")

    user_rng = np.random.default_rng(world.user_stream)
    click_rng = np.random.default_rng(world.click_stream)
    d = world.train_features.d
    models: dict[int, BanditModel] = {}
    shared = BanditModel.fresh(d, config.lam, config.c) if config.shared_model else None

    for t in range(1, config.T + 1):
        user = int(world.users[user_rng.integers(len(world.users))])
        if shared is not None:
            model = shared
        else:
            model = models.get(user)
            if model is None:
                model = models[user] = BanditModel.fresh(d, config.lam, config.c)
        ranked = select_list(
            model, world.train_features, config.K, user=user, round_index=t
        )
        click = simulate_click(ranked, truth[user], world.test_features, click_rng)
        fb = Feedback(ranked, click)
        if config.reward_model == "standard":
            update_standard(model, fb)
        else:
            update_exposure_aware(model, fb, gamma=config.gamma)
        yield RoundLog(
            round=t,
            user=user,
            items=tuple(int(i) for i in ranked.items),
            click_index=click,
            examined_count=fb.examined_count,
        )
