"""Scale alignment against ground truth and the map deviation metric.

Correspondences are found in map space: each estimated point is matched to
its nearest ground-truth neighbor within a distance gate (one ground-truth
point may serve several estimated points). Per-axis scale is recovered from
trajectory translations anchored at the first shared pose, as the
least-squares ratio per axis.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTrajectory,
    EmptyCloud,
    InvalidParams,
    NoCorrespondences,
    TooFewPoses,
)
from .geometry import PointCloud, as_point, bounding_box
from .spatial import KdTree


@dataclass(frozen=True)
class CorrespondenceSet:
    """Matched (estimated index, ground-truth index, distance) triples.

    deviations[i] = ground_truth_point - estimated_point for each pair.
    """

    est_indices: np.ndarray
    gt_indices: np.ndarray
    distances: np.ndarray
    deviations: np.ndarray

    def __len__(self):
        return self.est_indices.shape[0]


@dataclass(frozen=True)
class ScaleFactor:
    s_x: float
    s_y: float
    s_z: float

    def __post_init__(self):
        for c in (self.s_x, self.s_y, self.s_z):
            if not (np.isfinite(c) and c > 0):
                raise InvalidParams(f"scale components must be finite and > 0, got {c}")

    def as_array(self):
        return np.array([self.s_x, self.s_y, self.s_z])

    def inverse(self):
        return ScaleFactor(1.0 / self.s_x, 1.0 / self.s_y, 1.0 / self.s_z)


def find_correspondences(estimated, ground_truth, max_dist):
    """Match each estimated point to its nearest ground-truth point.

    Points farther than max_dist from every ground-truth point stay
    unmatched. Raises NoCorrespondences when nothing matches (usually a
    scale or frame mismatch).
    """
    if len(estimated) == 0 or len(ground_truth) == 0:
        raise EmptyCloud("find_correspondences needs two non-empty clouds")
    if not (max_dist > 0):
        raise InvalidParams(f"max_dist must be > 0, got {max_dist}")
    tree = KdTree(ground_truth)
    idx, dist, _ = tree.knn_batch(estimated.points, 1)
    matched = dist[:, 0] <= max_dist
    est_idx = np.flatnonzero(matched)
    if est_idx.size == 0:
        raise NoCorrespondences(
            f"no ground-truth point within {max_dist} of any estimated point"
        )
    gt_idx = idx[matched, 0]
    deviations = ground_truth.points[gt_idx] - estimated.points[est_idx]
    return CorrespondenceSet(
        est_indices=est_idx,
        gt_indices=gt_idx,
        distances=dist[matched, 0],
        deviations=deviations,
    )


def _matched_anchored_translations(estimated_traj, ground_truth_traj):
    et = {p.t: p.translation for p in estimated_traj}
    gt_pairs = [(p.t, p.translation) for p in ground_truth_traj if p.t in et]
    if len(gt_pairs) < 2:
        raise TooFewPoses(
            f"need >= 2 poses with shared time indices, got {len(gt_pairs)}"
        )
    gt = np.array([g for _, g in gt_pairs])
    est = np.array([et[t] for t, _ in gt_pairs])
    return est - est[0], gt - gt[0]


def estimate_scale(estimated_traj, ground_truth_traj):
    """Per-axis scale mapping estimated translations onto ground truth.

    Both trajectories are anchored at their first shared pose; each axis
    scale is the least-squares ratio sum(gt*est) / sum(est^2). An axis with
    no estimated spread falls back to the geometric mean of the others.
    """
    est, gt = _matched_anchored_translations(estimated_traj, ground_truth_traj)
    denom = (est * est).sum(axis=0)
    numer = (gt * est).sum(axis=0)
    spread = float(np.max(denom))
    usable = denom > max(spread, 1.0) * 1e-24
    if not usable.any():
        raise DegenerateTrajectory("no axis has estimated translation spread")
    s = np.ones(3)
    s[usable] = numer[usable] / denom[usable]
    if np.any(s[usable] <= 0) or not np.all(np.isfinite(s[usable])):
        raise DegenerateTrajectory(f"non-positive least-squares scale {s}")
    if not usable.all():
        fallback = float(np.exp(np.mean(np.log(s[usable]))))
        s[~usable] = fallback
    return ScaleFactor(*s)


def apply_scale(cloud, s, anchor=(0.0, 0.0, 0.0)):
    """Scale a cloud about an anchor: p -> anchor + s * (p - anchor)."""
    anchor = as_point(anchor)
    return PointCloud(anchor + s.as_array() * (cloud.points - anchor))


@dataclass(frozen=True)
class MapError:
    mean_error: float
    percent_error: float
    matched_fraction: float


def default_max_dist(ground_truth):
    """2x the median nearest-neighbor spacing of the ground-truth cloud."""
    if len(ground_truth) < 2:
        raise EmptyCloud("default_max_dist needs >= 2 ground-truth points")
    tree = KdTree(ground_truth)
    _, dist, _ = tree.knn_batch(ground_truth.points, 2)
    return 2.0 * float(np.median(dist[:, 1]))


def map_error(estimated, ground_truth, max_dist):
    """Mean matched distance, normalized percent and matched fraction.

    percent_error normalizes by the ground-truth bounding-box diagonal, so
    it is comparable across runs on one scene but not across scenes.
    """
    corr = find_correspondences(estimated, ground_truth, max_dist)
    mean_error = float(np.mean(corr.distances))
    diag = bounding_box(ground_truth).diagonal
    percent = 100.0 * mean_error / diag if diag > 0 else 0.0
    return MapError(
        mean_error=mean_error,
        percent_error=percent,
        matched_fraction=len(corr) / len(estimated),
    )
