import numpy as np
import pytest

from cascadefair import binarize, split_train_test, subsample
from cascadefair.synth import synthetic_ratings


@pytest.fixture(scope="session")
def small_corpus():
    """Binarized synthetic corpus, small enough for per-test simulations."""
    raw = synthetic_ratings(n_users=90, n_items=180, seed=11)
    return subsample(binarize(raw), top_users=80)


@pytest.fixture(scope="session")
def small_split(small_corpus):
    return split_train_test(small_corpus, ratio=0.5, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
