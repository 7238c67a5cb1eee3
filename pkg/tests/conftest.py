"""Shared helpers for the test suite: tiny deterministic datasets."""

import numpy as np
import pytest

from noseaug.data import LabeledDataset


def blobs(means, n_per, scale=0.1, seed=0, n_classes=None):
    """Gaussian blob per row of ``means``; labels follow the row order."""
    means = np.asarray(means, dtype=np.float64)
    rng = np.random.default_rng(seed)
    X = np.vstack(
        [m + scale * rng.standard_normal((n_per, means.shape[1])) for m in means]
    )
    y = np.repeat(np.arange(means.shape[0], dtype=np.int64), n_per)
    return LabeledDataset(X, y, n_classes or means.shape[0])


def corner_means(n_classes, n_features, spread=10.0):
    """Well-separated class means: ``spread`` on one axis per class."""
    means = np.zeros((n_classes, n_features))
    for c in range(n_classes):
        means[c, c % n_features] = spread * (1 + c // n_features)
    return means


@pytest.fixture
def tight_clusters():
    """Four well-separated 6-D clusters, 20 rows each; trivially separable."""
    return blobs(corner_means(4, 6), n_per=20, scale=0.05, seed=3)
