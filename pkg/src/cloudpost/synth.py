"""Synthetic scenes with exact ground truth for the benchmark harness.

Scenes are built from analytic primitives (rectangular patches, boxes,
spheres) so point-to-surface distance is exact. The generator emits a dense
ground-truth cloud, a sparse noisy "estimated" map with injected outliers
and a known per-axis scale, matching trajectories, and per-point
inlier/outlier labels that serve as the oracle for filter recall tests.
"""

from dataclasses import dataclass, field

import numpy as np

from .align import ScaleFactor
from .errors import InvalidSpec
from .geometry import PointCloud, Pose, Trajectory


@dataclass(frozen=True)
class RectPatch:
    """Flat rectangular patch: origin + a*edge_u + b*edge_v, a,b in [0,1].

    Edges must be perpendicular so the point-to-patch distance is exact.
    """

    origin: tuple
    edge_u: tuple
    edge_v: tuple

    def _arrays(self):
        o = np.asarray(self.origin, dtype=np.float64)
        u = np.asarray(self.edge_u, dtype=np.float64)
        v = np.asarray(self.edge_v, dtype=np.float64)
        if abs(float(u @ v)) > 1e-9 * np.linalg.norm(u) * np.linalg.norm(v):
            raise InvalidSpec("RectPatch edges must be perpendicular")
        return o, u, v

    @property
    def area(self):
        _, u, v = self._arrays()
        return float(np.linalg.norm(np.cross(u, v)))

    def sample(self, rng, n):
        o, u, v = self._arrays()
        ab = rng.random((n, 2))
        return o + ab[:, :1] * u + ab[:, 1:] * v

    def distance(self, points):
        o, u, v = self._arrays()
        lu, lv = np.linalg.norm(u), np.linalg.norm(v)
        uu, vv = u / lu, v / lv
        rel = np.asarray(points) - o
        a = np.clip(rel @ uu, 0.0, lu)
        b = np.clip(rel @ vv, 0.0, lv)
        closest = o + a[:, None] * uu + b[:, None] * vv
        return np.linalg.norm(np.asarray(points) - closest, axis=1)


@dataclass(frozen=True)
class Sphere:
    """Full sphere surface."""

    center: tuple
    radius: float

    @property
    def area(self):
        return float(4.0 * np.pi * self.radius**2)

    def sample(self, rng, n):
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return np.asarray(self.center, dtype=np.float64) + self.radius * d

    def distance(self, points):
        r = np.linalg.norm(np.asarray(points) - np.asarray(self.center), axis=1)
        return np.abs(r - self.radius)


def box_patches(corner, sizes):
    """Six rectangular faces of an axis-aligned box."""
    cx, cy, cz = corner
    sx, sy, sz = sizes
    return (
        RectPatch((cx, cy, cz), (sx, 0, 0), (0, sy, 0)),
        RectPatch((cx, cy, cz + sz), (sx, 0, 0), (0, sy, 0)),
        RectPatch((cx, cy, cz), (sx, 0, 0), (0, 0, sz)),
        RectPatch((cx, cy + sy, cz), (sx, 0, 0), (0, 0, sz)),
        RectPatch((cx, cy, cz), (0, sy, 0), (0, 0, sz)),
        RectPatch((cx + sx, cy, cz), (0, sy, 0), (0, 0, sz)),
    )


def corridor_primitives(length=10.0, width=2.0, height=2.5):
    """Default scene: a corridor of 4 planes with two box obstacles."""
    return (
        RectPatch((0, -width / 2, 0), (length, 0, 0), (0, width, 0)),
        RectPatch((0, -width / 2, height), (length, 0, 0), (0, width, 0)),
        RectPatch((0, -width / 2, 0), (length, 0, 0), (0, 0, height)),
        RectPatch((0, width / 2, 0), (length, 0, 0), (0, 0, height)),
        *box_patches((3.0, -0.7, 0.0), (0.6, 0.6, 0.8)),
        *box_patches((7.0, 0.2, 0.0), (0.5, 0.5, 1.2)),
    )


@dataclass(frozen=True)
class SceneSpec:
    primitives: tuple = field(default_factory=corridor_primitives)
    gt_density: float = 800.0  # points per unit area
    sparse_fraction: float = 0.115
    noise_sigma: float = 0.02
    outlier_fraction: float = 0.05
    outlier_scale: float = 0.5  # minimum outlier distance from any surface
    true_scale: ScaleFactor = ScaleFactor(1.0, 1.0, 1.0)
    n_poses: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.primitives:
            raise InvalidSpec("scene needs at least one primitive")
        if not (self.gt_density > 0):
            raise InvalidSpec("gt_density must be > 0")
        if not (0.0 <= self.sparse_fraction <= 1.0):
            raise InvalidSpec("sparse_fraction must be in [0, 1]")
        if not (0.0 <= self.outlier_fraction <= 1.0):
            raise InvalidSpec("outlier_fraction must be in [0, 1]")
        if self.noise_sigma < 0:
            raise InvalidSpec("noise_sigma must be >= 0")
        if not (self.outlier_scale > 0):
            raise InvalidSpec("outlier_scale must be > 0")
        if self.n_poses < 2:
            raise InvalidSpec("n_poses must be >= 2")


@dataclass(frozen=True)
class SceneBundle:
    ground_truth: PointCloud
    estimated: PointCloud
    gt_traj: Trajectory
    est_traj: Trajectory
    labels: np.ndarray  # 1 = injected outlier, 0 = inlier
    spec: SceneSpec


def surface_distance(spec, points):
    """Exact distance from each point to the nearest scene primitive."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    dists = np.stack([prim.distance(points) for prim in spec.primitives])
    return dists.min(axis=0)


def _sample_ground_truth(spec):
    parts = []
    for k, prim in enumerate(spec.primitives):
        n = int(round(prim.area * spec.gt_density))
        if n > 0:
            parts.append(prim.sample(np.random.default_rng([spec.seed, 1, k]), n))
    if not parts:
        raise InvalidSpec("scene primitives produced no ground-truth points")
    return np.concatenate(parts)


def _corridor_trajectory(spec, bbox_min, bbox_max):
    t = np.arange(spec.n_poses, dtype=np.float64)
    u = t / (spec.n_poses - 1)
    span = bbox_max - bbox_min
    x = bbox_min[0] + span[0] * (0.05 + 0.9 * u)
    y = bbox_min[1] + span[1] * (0.5 + 0.25 * np.sin(2.0 * np.pi * u))
    z = bbox_min[2] + span[2] * (0.5 + 0.15 * np.sin(4.0 * np.pi * u + 1.0))
    poses = []
    for i in range(spec.n_poses):
        if i + 1 < spec.n_poses:
            heading = np.arctan2(y[i + 1] - y[i], x[i + 1] - x[i])
        poses.append(Pose.from_euler(float(t[i]), (x[i], y[i], z[i]), yaw=heading))
    return Trajectory(poses)


def generate_scene(spec):
    """Generate (ground truth, estimated map, trajectories, labels).

    The estimated map is a sparse noisy subsample of ground truth plus
    uniform outliers at least spec.outlier_scale away from every surface,
    scaled by 1/true_scale about the first pose. Fully deterministic per
    seed.
    """
    gt_pts = _sample_ground_truth(spec)
    k_total = gt_pts.shape[0]
    n_est = int(np.floor(k_total * spec.sparse_fraction))
    n_out = int(np.floor(n_est * spec.outlier_fraction))
    n_in = n_est - n_out

    rng_sel = np.random.default_rng([spec.seed, 2])
    sel = rng_sel.choice(k_total, size=n_in, replace=False)
    inliers = gt_pts[np.sort(sel)]
    if spec.noise_sigma > 0:
        inliers = inliers + np.random.default_rng([spec.seed, 3]).normal(
            0.0, spec.noise_sigma, size=inliers.shape
        )

    bbox_min = gt_pts.min(axis=0)
    bbox_max = gt_pts.max(axis=0)
    lo = bbox_min - spec.outlier_scale * 2.0
    hi = bbox_max + spec.outlier_scale * 2.0
    rng_out = np.random.default_rng([spec.seed, 4])
    outliers = np.zeros((0, 3))
    while outliers.shape[0] < n_out:
        draw = lo + (hi - lo) * rng_out.random((max(4 * n_out, 64), 3))
        far = surface_distance(spec, draw) >= spec.outlier_scale
        outliers = np.concatenate([outliers, draw[far]])
    outliers = outliers[:n_out]

    est_pts = np.concatenate([inliers, outliers])
    labels = np.concatenate(
        [np.zeros(n_in, dtype=np.int8), np.ones(n_out, dtype=np.int8)]
    )
    perm = np.random.default_rng([spec.seed, 5]).permutation(n_est)
    est_pts = est_pts[perm]
    labels = labels[perm]

    gt_traj = _corridor_trajectory(spec, bbox_min, bbox_max)
    anchor = gt_traj[0].translation
    s = spec.true_scale.as_array()
    if np.all(s == 1.0):
        est_traj = gt_traj
    else:
        est_pts = anchor + (est_pts - anchor) / s
        est_traj = Trajectory(
            [
                Pose(p.t, anchor + (p.translation - anchor) / s, p.quaternion)
                for p in gt_traj
            ]
        )

    return SceneBundle(
        ground_truth=PointCloud(gt_pts),
        estimated=PointCloud(est_pts),
        gt_traj=gt_traj,
        est_traj=est_traj,
        labels=labels,
        spec=spec,
    )


def write_labels(labels, path):
    with open(path, "w", newline="\n") as f:
        for tag in labels:
            f.write("outlier\n" if tag else "inlier\n")


def read_labels(path):
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(1 if line == "outlier" else 0)
    return np.array(out, dtype=np.int8)
