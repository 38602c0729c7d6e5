"""Exposure accounting and the evaluation metric suite.

Three cumulative per-item exposure notions feed the metrics:

* ``E``   — appearance count, position-blind.
* ``PE``  — appearances weighted by the position drop-off ``1/log2(1+k)``.
* ``PEE`` — like PE but only for positions the user actually examined under
  the cascade (everything below a click is unseen).

Equality of opportunity (EO) and equality of impact (EI) are the Gini index
of the normalized PE and PEE distributions over the full catalog; 0 means
perfectly uniform exposure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .simulate import RoundLog


@dataclass
class ExposureLedger:
    """Cumulative exposure accumulators across rounds, one slot per item."""

    E: np.ndarray
    PE: np.ndarray
    PEE: np.ndarray
    item_clicks: np.ndarray
    clicks: int = 0
    rounds_seen: int = 0

    @classmethod
    def empty(cls, m: int) -> "ExposureLedger":
        if m < 1:
            raise ValueError("need at least one item")
        return cls(
            E=np.zeros(m, dtype=np.int64),
            PE=np.zeros(m),
            PEE=np.zeros(m),
            item_clicks=np.zeros(m, dtype=np.int64),
        )

    @property
    def m(self) -> int:
        return len(self.E)


def position_weight(k: int) -> float:
    """Exposure value of list position k: ``1/log2(1+k)`` (1.0 at the top)."""
    if k < 1:
        raise ValueError("positions are 1-based")
    return 1.0 / math.log2(1 + k)


def ingest_round(ledger: ExposureLedger, log: RoundLog) -> ExposureLedger:
    """Fold one round into the ledger (mutates and returns it)."""
    for k, item in enumerate(log.items, start=1):
        w = position_weight(k)
        ledger.E[item] += 1
        ledger.PE[item] += w
        if k <= log.examined_count:
            ledger.PEE[item] += w
    if log.click_index is not None:
        ledger.clicks += 1
        ledger.item_clicks[log.items[log.click_index - 1]] += 1
    ledger.rounds_seen += 1
    return ledger


def normalize(exposures: np.ndarray) -> np.ndarray:
    """Scale non-negative exposures to a distribution summing to one."""
    exposures = np.asarray(exposures, dtype=np.float64)
    total = exposures.sum()
    if total <= 0:
        raise ValueError("cannot normalize an all-zero exposure vector")
    return exposures / total


def gini(distribution: np.ndarray) -> float:
    """Gini index of a distribution over >= 2 items.

    Entries are sorted non-descending and combined as
    ``sum_k (2k - m - 1) x_k / (m - 1)`` with k running 1..m. Uniform input
    gives 0; total concentration on one item gives 1.
    """
    x = np.sort(np.asarray(distribution, dtype=np.float64))
    m = len(x)
    if m < 2:
        raise ValueError("Gini needs at least two items")
    if x[0] < 0:
        raise ValueError("distribution entries must be non-negative")
    k = np.arange(1, m + 1)
    return float(((2 * k - m - 1) * x).sum() / (m - 1))


def eo(ledger: ExposureLedger) -> float:
    """Equality of opportunity: Gini of normalized PE over all items."""
    return gini(normalize(ledger.PE))


def ei(ledger: ExposureLedger) -> float:
    """Equality of impact: Gini of normalized PEE over all items."""
    return gini(normalize(ledger.PEE))


def item_coverage(ledger: ExposureLedger, m: int | None = None) -> float:
    """Fraction of the catalog recommended at least once."""
    m = ledger.m if m is None else m
    if m < 1:
        raise ValueError("m must be >= 1")
    return float(np.count_nonzero(ledger.E) / m)


def false_positive_rate(
    recommended: np.ndarray, clicked: np.ndarray
) -> np.ndarray:
    """Per-item share of recommendations that got no click.

    ``(E_i - clicked_i) / E_i``; NaN marks items never recommended, for which
    the rate is undefined.
    """
    recommended = np.asarray(recommended, dtype=np.float64)
    clicked = np.asarray(clicked, dtype=np.float64)
    if np.any(clicked > recommended):
        raise ValueError("clicked counts cannot exceed recommended counts")
    out = np.full(recommended.shape, np.nan)
    shown = recommended > 0
    out[shown] = (recommended[shown] - clicked[shown]) / recommended[shown]
    return out


@dataclass(frozen=True)
class McNemarResult:
    statistic: float
    p_value: float
    degenerate: bool  # no discordant pairs; p = 1 by convention


def mcnemar(a_clicked: np.ndarray, b_clicked: np.ndarray) -> McNemarResult:
    """McNemar's test on paired per-round click outcomes.

    Uses the continuity-corrected statistic ``(|n01 - n10| - 1)^2 / (n01 +
    n10)`` on the discordant counts and the chi-square(1) survival function
    ``erfc(sqrt(stat / 2))`` for the p-value. Both input sequences must come
    from runs sharing the same round schedule.
    """
    a = np.asarray(a_clicked, dtype=bool)
    b = np.asarray(b_clicked, dtype=bool)
    if a.shape != b.shape:
        raise ValueError("paired outcome sequences differ in length")
    n01 = int(np.count_nonzero(~a & b))
    n10 = int(np.count_nonzero(a & ~b))
    if n01 + n10 == 0:
        return McNemarResult(statistic=0.0, p_value=1.0, degenerate=True)
    statistic = (abs(n01 - n10) - 1) ** 2 / (n01 + n10)
    p = math.erfc(math.sqrt(statistic / 2.0))
    return McNemarResult(statistic=float(statistic), p_value=float(p), degenerate=False)
