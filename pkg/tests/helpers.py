"""Shared construction helpers and independent oracles for tests."""

from itertools import permutations

import numpy as np
import scipy.sparse as sps

from cascadefair import InteractionMatrix, ucb_score


def matrix_from_dense(A, genres=None, topics=("g0", "g1")):
    """Wrap a dense binary array as an InteractionMatrix with stub genres."""
    A = np.asarray(A, dtype=np.float64)
    n, m = A.shape
    if genres is None:
        genres = tuple(frozenset({topics[j % len(topics)]}) for j in range(m))
    topic_index = {t: j for j, t in enumerate(sorted({g for gs in genres for g in gs}))}
    return InteractionMatrix(
        user_ids=tuple(f"u{i}" for i in range(n)),
        item_ids=tuple(f"i{j}" for j in range(m)),
        relevance=sps.csr_matrix(A),
        item_genres=tuple(genres),
        topic_index=topic_index,
    )


def brute_force_greedy(model, features, K):
    """Oracle: enumerate every ordered K-tuple and take the lexicographic
    argmax of its sequential score vector (ties toward the smaller tuple).

    For a greedy rule that maximizes position-by-position, the lexicographic
    maximum over all tuples is exactly the greedy list, but this search never
    calls the selection code.
    """
    best_tup, best_scores = None, None
    for tup in permutations(range(features.m), K):
        covered = features.empty_coverage()
        scores = []
        for item in tup:
            x = features.effective(covered)[item]
            scores.append(ucb_score(model, x))
            covered = features.advance(covered, item)
        scores = tuple(scores)
        if (
            best_scores is None
            or scores > best_scores
            or (scores == best_scores and tup < best_tup)
        ):
            best_tup, best_scores = tup, scores
    return best_tup
