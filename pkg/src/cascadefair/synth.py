"""Synthetic rating corpora with MovieLens-like structure.

Generates a 5-star rating table over a catalog with genre labels, a skewed
item popularity curve, and genre-clustered user tastes, so that the full
pipeline (binarize, subsample, split, SVD, topic features) behaves the way it
does on real interaction data. Useful for tests, demos, and desk-scale
experiments where no real corpus is available.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import RawRatings, Record


def synthetic_ratings(
    n_users: int = 600,
    n_items: int = 1200,
    n_genres: int = 18,
    latent_dim: int = 8,
    profile_min: int = 30,
    profile_max: int = 240,
    seed: int = 0,
) -> RawRatings:
    """Draw a rating corpus from a latent taste model with popularity skew.

    Items sit near one of ``n_genres`` genre prototypes in a latent space and
    carry one to three genre labels. Users mix a few prototypes. Each user
    rates a log-uniform number of items chosen by affinity (taste alignment
    plus item popularity plus noise); ratings 1..5 follow the affinity
    quantiles within the profile, putting roughly half of each profile at 4-5.
    """
    rng = np.random.default_rng(seed)

    protos = rng.standard_normal((n_genres, latent_dim))
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)

    primary = rng.integers(n_genres, size=n_items)
    V = protos[primary] + 0.6 * rng.standard_normal((n_items, latent_dim))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    item_genres = []
    for i in range(n_items):
        labels = {int(primary[i])}
        while len(labels) < min(3, n_genres) and rng.random() < 0.35:
            labels.add(int(rng.integers(n_genres)))
        item_genres.append(frozenset(f"genre{g:02d}" for g in sorted(labels)))

    # Popularity boost with a heavy head: ~10% of items get most of it.
    pop_rank = rng.permutation(n_items)
    popularity = 0.9 * (1.0 - pop_rank / n_items) ** 5

    n_prefs = rng.integers(1, 4, size=n_users)
    U = np.zeros((n_users, latent_dim))
    for u in range(n_users):
        chosen = rng.choice(n_genres, size=n_prefs[u], replace=False)
        weights = rng.dirichlet(np.ones(n_prefs[u]))
        U[u] = weights @ protos[chosen] + 0.25 * rng.standard_normal(latent_dim)
    U /= np.linalg.norm(U, axis=1, keepdims=True)

    affinity = 1.2 * (U @ V.T) + popularity + 0.3 * rng.standard_normal(
        (n_users, n_items)
    )

    log_lo, log_hi = np.log(profile_min), np.log(profile_max)
    sizes = np.exp(rng.uniform(log_lo, log_hi, size=n_users)).astype(int)
    sizes = np.clip(sizes, profile_min, min(profile_max, n_items))

    # Rating by affinity quantile within the profile: ~50% land at 4-5.
    cut_points = np.array([0.15, 0.35, 0.50, 0.80])  # shares of 1,2,3,4 from the bottom
    records: list[Record] = []
    for u in range(n_users):
        size = sizes[u]
        rated = np.argpartition(-affinity[u], size - 1)[:size]
        rated = rated[np.argsort(-affinity[u][rated], kind="stable")]
        bounds = (cut_points * size).astype(int)
        ratings = np.empty(size, dtype=np.int64)
        ratings[: bounds[0]] = 1
        ratings[bounds[0] : bounds[1]] = 2
        ratings[bounds[1] : bounds[2]] = 3
        ratings[bounds[2] : bounds[3]] = 4
        ratings[bounds[3] :] = 5
        ratings = ratings[::-1]  # rated[] is affinity-descending; 5s first
        for item, r in zip(rated, ratings):
            records.append(
                Record(
                    user=f"u{u:05d}",
                    item=f"i{item:05d}",
                    rating=float(r),
                    genres=item_genres[item],
                )
            )
    return RawRatings(tuple(records))


def write_ratings_csv(raw: RawRatings, path: str | Path) -> Path:
    """Write ``user,item,rating`` rows (with header) for :func:`cascadefair.load_ratings`."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user,item,rating\n")
        for r in raw.records:
            fh.write(f"{r.user},{r.item},{r.rating:g}\n")
    return path


def write_genres_csv(raw: RawRatings, path: str | Path) -> Path:
    """Write the companion ``item,genre1|genre2|...`` metadata file."""
    path = Path(path)
    table: dict[str, frozenset] = {}
    for r in raw.records:
        table[r.item] = table.get(r.item, frozenset()) | r.genres
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("item,genres\n")
        for item in sorted(table):
            fh.write(f"{item},{'|'.join(sorted(table[item]))}\n")
    return path


def write_dataset(raw: RawRatings, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ratings + genre metadata into ``out_dir``; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return (
        write_ratings_csv(raw, out_dir / "ratings.csv"),
        write_genres_csv(raw, out_dir / "genres.csv"),
    )
