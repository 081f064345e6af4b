"""Radius-based and statistical outlier removal.

Both filters are pure functions: neighborhoods are evaluated against the
original cloud in one batch (no cascading within a call), the output keeps
the input order of surviving points, and a point is never counted as its
own neighbor.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCloud, InvalidParams, TooFewPoints
from .geometry import PointCloud
from .spatial import KdTree


@dataclass(frozen=True)
class RadiusFilterParams:
    """Keep a point iff it has at least b neighbors within radius r."""

    r: float
    b: int

    def __post_init__(self):
        if not (self.r > 0):
            raise InvalidParams(f"radius filter needs r > 0, got {self.r}")
        if self.b < 1:
            raise InvalidParams(f"radius filter needs b >= 1, got {self.b}")


@dataclass(frozen=True)
class StatFilterParams:
    """Mean distance to l nearest neighbors, thresholded at mu + h * sigma."""

    l: int = 50
    h: float = 1.8

    def __post_init__(self):
        if self.l < 1:
            raise InvalidParams(f"statistical filter needs l >= 1, got {self.l}")
        if not (self.h > 0):
            raise InvalidParams(f"statistical filter needs h > 0, got {self.h}")


@dataclass(frozen=True)
class FilterReport:
    """Which input indices survived; threshold_used only for statistical."""

    kept: np.ndarray
    removed: np.ndarray
    threshold_used: float | None = None


def radius_filter(cloud, params):
    """Remove points with fewer than params.b neighbors within params.r.

    Returns (filtered cloud, FilterReport). Neighbor counts exclude the
    point itself and are computed against the full input cloud.
    """
    if len(cloud) == 0:
        raise EmptyCloud("radius_filter on empty cloud")
    tree = KdTree(cloud)
    _, _, offsets = tree.radius_batch(cloud.points, params.r)
    counts = np.diff(offsets) - 1  # self is always within r of itself
    keep = counts >= params.b
    kept = np.flatnonzero(keep)
    removed = np.flatnonzero(~keep)
    return cloud.select(kept), FilterReport(kept=kept, removed=removed)


def statistical_filter(cloud, params):
    """Remove points whose mean l-NN distance exceeds mu + h * sigma.

    Pass 1 computes a_i = mean distance from point i to its l nearest
    neighbors (self excluded); mu and sigma are the mean and population
    standard deviation of {a_i}. Pass 2 keeps points with a_i <= threshold.
    """
    if len(cloud) == 0:
        raise EmptyCloud("statistical_filter on empty cloud")
    if len(cloud) <= params.l:
        raise TooFewPoints(
            f"statistical_filter needs more than l={params.l} points, "
            f"got {len(cloud)}"
        )
    tree = KdTree(cloud)
    # k = l + 1: slot 0 is the query point itself at distance 0
    _, dist, _ = tree.knn_batch(cloud.points, params.l + 1)
    mean_dists = dist[:, 1:].mean(axis=1)
    mu = float(np.mean(mean_dists))
    sigma = float(np.sqrt(np.mean((mean_dists - mu) ** 2)))
    threshold = mu + params.h * sigma
    keep = mean_dists <= threshold
    kept = np.flatnonzero(keep)
    removed = np.flatnonzero(~keep)
    return cloud.select(kept), FilterReport(
        kept=kept, removed=removed, threshold_used=threshold
    )
