"""Rating data ingestion: loading, binarization, subsampling, train/test split.

The pipeline mirrors common implicit-feedback preprocessing: parse a delimited
ratings file plus genre metadata, map the 5-star scale onto {0, 1}, densify the
corpus by core filtering / top-N selection, and split each user's positive
interactions into train and test halves that share a single index space.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sps

log = logging.getLogger(__name__)

_DELIMITERS = {"csv": ",", "tsv": "\t"}


class Record(NamedTuple):
    """One (user, item, rating) observation with the item's genre labels."""

    user: str
    item: str
    rating: float
    genres: frozenset


@dataclass(frozen=True)
class RawRatings:
    """Flat list of rating records, optionally already mapped onto {0, 1}.

    ``binarized`` marks the output of :func:`binarize`; re-binarizing is a
    no-op, which keeps the operation idempotent even though a binary 1 would
    otherwise fall below any threshold in (1, 5].
    """

    records: tuple[Record, ...]
    binarized: bool = False

    def __len__(self) -> int:
        return len(self.records)

    def interactions(self) -> tuple[Record, ...]:
        """Records that count as positive interactions (rating > 0)."""
        return tuple(r for r in self.records if r.rating > 0)


@dataclass
class InteractionMatrix:
    """Sparse binary user x item relevance data with per-item genre labels.

    ``user_ids``/``item_ids`` fix the row/column order; ``topic_index`` maps
    each genre label to a column of the topic feature space. Matrices produced
    from the same split share these maps verbatim.
    """

    user_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    relevance: sps.csr_matrix
    item_genres: tuple[frozenset, ...]
    topic_index: dict[str, int]

    def __post_init__(self) -> None:
        if len(set(self.user_ids)) != len(self.user_ids):
            raise ValueError("duplicate user ids")
        if len(set(self.item_ids)) != len(self.item_ids):
            raise ValueError("duplicate item ids")
        if self.relevance.shape != (len(self.user_ids), len(self.item_ids)):
            raise ValueError("relevance shape does not match index maps")
        if self.relevance.nnz and not np.all(self.relevance.data == 1):
            raise ValueError("relevance entries must be binary")
        if any(len(g) == 0 for g in self.item_genres):
            raise ValueError("every item needs at least one genre")
        self.user_index = {u: i for i, u in enumerate(self.user_ids)}
        self.item_index = {it: j for j, it in enumerate(self.item_ids)}

    @property
    def n(self) -> int:
        return len(self.user_ids)

    @property
    def m(self) -> int:
        return len(self.item_ids)


def _parse_genres(cell: str) -> frozenset:
    return frozenset(g.strip() for g in cell.split("|") if g.strip())


def load_genre_file(path: str | Path, fmt: str = "csv") -> dict[str, frozenset]:
    """Read an item metadata file with columns ``item,genre1|genre2|...``."""
    delim = _DELIMITERS[fmt]
    table: dict[str, frozenset] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(delim)
            if len(parts) < 2:
                continue
            if lineno == 0 and parts[0].strip().lower() in {"item", "item_id", "itemid"}:
                continue
            genres = _parse_genres(parts[1])
            if genres:
                table[parts[0].strip()] = genres
    return table


def load_ratings(
    path: str | Path,
    fmt: str = "csv",
    genres_path: str | Path | None = None,
) -> RawRatings:
    """Load a delimited ratings file into :class:`RawRatings`.

    Each row is ``user,item,rating[,genres]``. A header row is auto-detected
    (rating field fails to parse). If ``genres_path`` is given, genre labels
    come from that metadata file and any fourth column is ignored; rows whose
    item is missing from the metadata are dropped with a warning. Otherwise
    the fourth column must hold pipe-separated genres.

    Raises
    ------
    FileNotFoundError
        Unreadable input file.
    ValueError
        Unknown format, or no valid rows survive parsing.
    """
    if fmt not in _DELIMITERS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {sorted(_DELIMITERS)}")
    delim = _DELIMITERS[fmt]
    genre_table = load_genre_file(genres_path, fmt) if genres_path is not None else None

    records: list[Record] = []
    malformed = 0
    missing_genre = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = [p.strip() for p in line.split(delim)]
            if len(parts) < 3:
                malformed += 1
                continue
            try:
                rating = float(parts[2])
            except ValueError:
                if lineno == 0:
                    continue  # header row
                malformed += 1
                continue
            if not (1.0 <= rating <= 5.0):
                malformed += 1
                continue
            user, item = parts[0], parts[1]
            if genre_table is not None:
                genres = genre_table.get(item)
                if genres is None:
                    missing_genre += 1
                    continue
            else:
                genres = _parse_genres(parts[3]) if len(parts) >= 4 else frozenset()
                if not genres:
                    malformed += 1
                    continue
            records.append(Record(user, item, rating, genres))

    if malformed:
        log.warning("skipped %d malformed rows in %s", malformed, path)
    if missing_genre:
        log.warning("dropped %d rows whose item has no genre metadata", missing_genre)
    if not records:
        raise ValueError(f"zero valid rows in {path}")
    return RawRatings(tuple(records))


def binarize(raw: RawRatings, threshold: float = 4.0) -> RawRatings:
    """Map ratings >= ``threshold`` to 1 and the rest to 0.

    Idempotent: already-binarized input is returned unchanged.
    """
    if not 1.0 < threshold <= 5.0:
        raise ValueError(f"threshold must lie in (1, 5], got {threshold}")
    if raw.binarized:
        return raw
    records = tuple(
        r._replace(rating=1.0 if r.rating >= threshold else 0.0) for r in raw.records
    )
    return RawRatings(records, binarized=True)


def _positive_counts(records) -> tuple[Counter, Counter]:
    users: Counter = Counter()
    items: Counter = Counter()
    for r in records:
        if r.rating > 0:
            users[r.user] += 1
            items[r.item] += 1
    return users, items


def _top_n(counts: Counter, n: int | None) -> set:
    if n is None or n >= len(counts):
        return set(counts)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return {key for key, _ in ranked[:n]}


def subsample(
    raw: RawRatings,
    core: int = 0,
    top_users: int | None = None,
    top_items: int | None = None,
) -> RawRatings:
    """Densify the corpus: core filtering, then most-active-user / most-rated-item selection.

    With ``core > 0``, users and items with fewer than ``core`` positive
    interactions are removed iteratively until a fixpoint. Then the
    ``top_users`` users with most interactions are kept, and among their
    records the ``top_items`` most-rated items (``None`` disables either
    limit). Ties break by lexicographic id so the selection is deterministic.
    """
    if core < 0:
        raise ValueError("core must be >= 0")
    if top_users is not None and top_users < 1:
        raise ValueError("top_users must be >= 1")
    if top_items is not None and top_items < 1:
        raise ValueError("top_items must be >= 1")

    records = list(raw.records)
    if core > 0:
        while True:
            users, items = _positive_counts(records)
            keep_u = {u for u, c in users.items() if c >= core}
            keep_i = {i for i, c in items.items() if c >= core}
            kept = [r for r in records if r.user in keep_u and r.item in keep_i]
            if len(kept) == len(records):
                break
            records = kept

    users, _ = _positive_counts(records)
    keep_u = _top_n(users, top_users)
    records = [r for r in records if r.user in keep_u]

    _, items = _positive_counts(records)
    keep_i = _top_n(items, top_items)
    records = [r for r in records if r.item in keep_i]

    if not any(r.rating > 0 for r in records):
        raise ValueError("result empty after filtering")
    return RawRatings(tuple(records), binarized=raw.binarized)


def split_train_test(
    raw: RawRatings, ratio: float = 0.5, seed: int = 0
) -> tuple[InteractionMatrix, InteractionMatrix]:
    """Partition each user's positive interactions into train and test matrices.

    Train receives ``ceil(ratio * profile_size)`` interactions per user, the
    remainder goes to test. Users with fewer than two interactions, or whose
    split would leave either side empty, are dropped (logged). Both outputs
    share identical user/item/topic index maps, and the split is a pure
    function of ``seed``.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")

    by_user: dict[str, list[Record]] = defaultdict(list)
    for r in raw.records:
        if r.rating > 0:
            by_user[r.user].append(r)

    retained: dict[str, list[Record]] = {}
    dropped = 0
    for user in sorted(by_user):
        profile = by_user[user]
        n_train = math.ceil(ratio * len(profile))
        if len(profile) < 2 or n_train == len(profile) or n_train == 0:
            dropped += 1
            continue
        retained[user] = sorted(profile, key=lambda r: r.item)
    if dropped:
        log.info("dropped %d users that cannot appear on both split sides", dropped)
    if not retained:
        raise ValueError("no users left after enforcing the two-sided split")

    item_genres_map: dict[str, frozenset] = {}
    for profile in retained.values():
        for r in profile:
            item_genres_map[r.item] = item_genres_map.get(r.item, frozenset()) | r.genres

    user_ids = tuple(sorted(retained))
    item_ids = tuple(sorted(item_genres_map))
    item_index = {it: j for j, it in enumerate(item_ids)}
    topics = sorted({g for gs in item_genres_map.values() for g in gs})
    topic_index = {t: j for j, t in enumerate(topics)}
    genres = tuple(item_genres_map[it] for it in item_ids)

    rng = np.random.default_rng(seed)
    rows: dict[str, list[int]] = {"train": [], "test": []}
    cols: dict[str, list[int]] = {"train": [], "test": []}
    for u, user in enumerate(user_ids):
        profile = retained[user]
        order = rng.permutation(len(profile))
        n_train = math.ceil(ratio * len(profile))
        for rank, idx in enumerate(order):
            side = "train" if rank < n_train else "test"
            rows[side].append(u)
            cols[side].append(item_index[profile[idx].item])

    shape = (len(user_ids), len(item_ids))
    matrices = []
    for side in ("train", "test"):
        data = np.ones(len(rows[side]), dtype=np.float64)
        rel = sps.csr_matrix((data, (rows[side], cols[side])), shape=shape)
        matrices.append(
            InteractionMatrix(user_ids, item_ids, rel, genres, dict(topic_index))
        )
    return matrices[0], matrices[1]
