"""Simulation engine for studying exposure bias in top-K cascading bandit recommenders.

Subpackages by concern: ``data`` (ingestion and splitting), ``features``
(item representations and ground truth), ``bandit`` (UCB ranking), ``reward``
(standard and exposure-aware updates), ``simulate`` (the round loop),
``metrics`` (exposure ledgers, Gini-based fairness measures, significance
tests), ``synth`` (synthetic corpora), ``cli`` (experiment orchestration).
"""

from .bandit import BanditModel, RankedList, select_list, theta_hat, ucb_score, ucb_scores
from .data import (
    InteractionMatrix,
    RawRatings,
    Record,
    binarize,
    load_ratings,
    split_train_test,
    subsample,
)
from .features import (
    FeatureSpace,
    advance_coverage,
    attach_user_truth,
    derive_user_truth,
    hybrid_features,
    latent_features,
    topic_base_features,
    topic_gain,
    truncated_svd,
)
from .metrics import (
    ExposureLedger,
    McNemarResult,
    eo,
    ei,
    false_positive_rate,
    gini,
    ingest_round,
    item_coverage,
    mcnemar,
    normalize,
    position_weight,
)
from .reward import (
    Feedback,
    examined_positions,
    exposure_weight,
    sherman_morrison_update,
    update_exposure_aware,
    update_standard,
)
from .simulate import (
    ALGORITHMS,
    REWARD_MODELS,
    RoundLog,
    SimConfig,
    SimWorld,
    build_world,
    optimal_list,
    run,
    simulate_click,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "BanditModel",
    "ExposureLedger",
    "FeatureSpace",
    "Feedback",
    "InteractionMatrix",
    "McNemarResult",
    "RankedList",
    "RawRatings",
    "Record",
    "REWARD_MODELS",
    "RoundLog",
    "SimConfig",
    "SimWorld",
    "advance_coverage",
    "attach_user_truth",
    "binarize",
    "build_world",
    "derive_user_truth",
    "ei",
    "eo",
    "examined_positions",
    "exposure_weight",
    "false_positive_rate",
    "gini",
    "hybrid_features",
    "ingest_round",
    "item_coverage",
    "latent_features",
    "load_ratings",
    "mcnemar",
    "normalize",
    "optimal_list",
    "position_weight",
    "run",
    "select_list",
    "sherman_morrison_update",
    "simulate_click",
    "split_train_test",
    "subsample",
    "theta_hat",
    "topic_base_features",
    "topic_gain",
    "truncated_svd",
    "ucb_score",
    "ucb_scores",
    "update_exposure_aware",
    "update_standard",
]
