"""Model updates from cascade feedback.

Under the cascade click model the user examines positions top-down and stops
at the first click, so only positions 1..min(click, K) are observed. Both
update rules add every examined feature's outer product to the covariance
(via rank-one inverse maintenance); they differ in the importance weight
credited to ``B``:

* standard       — weight 1 at the clicked position, 0 elsewhere.
* exposure-aware — weight ``log2(1 + k)`` at the clicked position and
  ``-gamma / log2(1 + k)`` at examined-but-unclicked positions, so deep
  clicks are rewarded more and high unclicked placements penalized more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bandit import BanditModel, RankedList


@dataclass(frozen=True)
class Feedback:
    """A ranked list together with the 1-based click position (None = no click)."""

    ranked: RankedList
    click_index: int | None

    def __post_init__(self) -> None:
        if self.click_index is not None and not 1 <= self.click_index <= self.ranked.K:
            raise ValueError(
                f"click_index {self.click_index} outside 1..{self.ranked.K}"
            )

    @property
    def examined_count(self) -> int:
        return self.ranked.K if self.click_index is None else self.click_index


def examined_positions(fb: Feedback) -> range:
    """1-based positions the user observed: 1..click if clicked, else 1..K."""
    return range(1, fb.examined_count + 1)


def sherman_morrison_update(Minv: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Inverse of ``M + x x^T`` from the inverse of ``M``.

    ``Minv - (Minv x x^T Minv) / (1 + x^T Minv x)``, re-symmetrized to stop
    rounding drift from accumulating over many rank-one updates.
    """
    u = Minv @ x
    denom = 1.0 + float(x @ u)
    if denom <= 0.0:
        raise FloatingPointError(
            f"Sherman-Morrison denominator {denom:.3e} <= 0: Minv lost positive definiteness"
        )
    out = Minv - np.outer(u, u) / denom
    return (out + out.T) / 2.0


def _selection_features(fb: Feedback, features: np.ndarray | None) -> np.ndarray:
    feats = fb.ranked.features if features is None else np.asarray(features)
    if feats is None:
        raise ValueError("feedback carries no selection-time feature cache")
    if len(feats) != fb.ranked.K:
        raise ValueError(
            f"feature cache has {len(feats)} rows for a K={fb.ranked.K} list"
        )
    return feats


def update_standard(
    model: BanditModel, fb: Feedback, features: np.ndarray | None = None
) -> BanditModel:
    """Apply the plain cascade update in place.

    For each examined position the covariance inverse absorbs the
    selection-time feature; ``B`` gains the clicked position's feature with
    weight 1. ``features`` overrides the cache carried by the ranked list.
    """
    feats = _selection_features(fb, features)
    for k in examined_positions(fb):
        x = feats[k - 1]
        model.Minv = sherman_morrison_update(model.Minv, x)
        if k == fb.click_index:
            model.B = model.B + x
    return model


def exposure_weight(C: int | None, k: int, gamma: float) -> float:
    """Importance weight for an examined position under the exposure-aware rule.

    ``log2(1 + k)`` at the clicked position; ``-gamma / log2(1 + k)`` when the
    position was examined without a click (k below the click, or no click at
    all). Positions past a click are unobserved, so ``k > C`` is a caller bug.
    """
    if k < 1:
        raise ValueError("positions are 1-based")
    if C is not None and k > C:
        raise ValueError(f"position {k} below the click at {C} was never examined")
    if C is not None and k == C:
        return math.log2(1 + k)
    return -gamma / math.log2(1 + k)


def update_exposure_aware(
    model: BanditModel,
    fb: Feedback,
    gamma: float = 5e-5,
    features: np.ndarray | None = None,
) -> BanditModel:
    """Apply the exposure-aware update in place.

    The covariance update is identical to :func:`update_standard`; only the
    weight added to ``B`` changes, per :func:`exposure_weight`.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    feats = _selection_features(fb, features)
    for k in examined_positions(fb):
        x = feats[k - 1]
        model.Minv = sherman_morrison_update(model.Minv, x)
        w = exposure_weight(fb.click_index, k, gamma)
        if w != 0.0:
            model.B = model.B + w * x
    return model
