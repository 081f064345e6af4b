import numpy as np
import pytest

from cloudpost.geometry import PointCloud


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


def brute_knn(pts, query, k):
    """Reference k-NN: full scan, sort by (distance, index)."""
    d2 = ((pts - np.asarray(query)) ** 2).sum(axis=1)
    order = np.lexsort((np.arange(len(pts)), d2))[:k]
    return order, np.sqrt(d2[order])


def brute_radius(pts, query, r):
    """Reference radius search: full scan, distance <= r, same ordering."""
    d2 = ((pts - np.asarray(query)) ** 2).sum(axis=1)
    hit = np.flatnonzero(d2 <= r * r)
    order = hit[np.lexsort((hit, d2[hit]))]
    return order, np.sqrt(d2[order])


def random_cloud(rng, n, scale=1.0):
    return PointCloud(rng.random((n, 3)) * scale)
