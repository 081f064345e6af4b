"""Core value types: points, clouds, poses, trajectories, bounding boxes.

Everything is float64 and immutable after construction; filters return new
clouds instead of mutating. Angles follow the Z-Y-X (yaw-pitch-roll)
convention, quaternions are stored as (qx, qy, qz, qw).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCloud, InvalidParams


def as_point(p):
    """Coerce to a finite float64 vector of length 3."""
    a = np.asarray(p, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(a)):
        raise InvalidParams(f"non-finite point coordinates: {a}")
    return a


class PointCloud:
    """Immutable ordered set of 3D points backed by an (N, 3) float64 array."""

    __slots__ = ("_pts",)

    def __init__(self, points):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidParams(f"expected (N, 3) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            bad = int(np.flatnonzero(~np.isfinite(pts).all(axis=1))[0])
            raise InvalidParams(f"non-finite coordinates at point {bad}")
        pts = pts.copy()
        pts.flags.writeable = False
        self._pts = pts

    @property
    def points(self):
        return self._pts

    def __len__(self):
        return self._pts.shape[0]

    def __iter__(self):
        return iter(self._pts)

    def __getitem__(self, i):
        return self._pts[i]

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self._pts.shape == other._pts.shape and np.array_equal(
            self._pts, other._pts
        )

    def __repr__(self):
        return f"PointCloud({len(self)} points)"

    def translated(self, v):
        return PointCloud(self._pts + as_point(v))

    def select(self, indices):
        """New cloud of the given point indices, in the given order."""
        return PointCloud(self._pts[np.asarray(indices, dtype=np.intp)])


@dataclass(frozen=True)
class AABB:
    """Axis-aligned bounding box, min <= max per coordinate."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min", as_point(self.min))
        object.__setattr__(self, "max", as_point(self.max))
        if np.any(self.min > self.max):
            raise InvalidParams("AABB min exceeds max")

    @property
    def diagonal(self):
        return float(np.linalg.norm(self.max - self.min))

    def contains(self, p):
        p = as_point(p)
        return bool(np.all(p >= self.min) and np.all(p <= self.max))


def bounding_box(cloud):
    """Tightest axis-aligned box containing all points of a non-empty cloud."""
    if len(cloud) == 0:
        raise EmptyCloud("bounding_box of empty cloud")
    pts = cloud.points
    return AABB(pts.min(axis=0), pts.max(axis=0))


def centroid(cloud):
    """Arithmetic per-coordinate mean of a non-empty cloud."""
    if len(cloud) == 0:
        raise EmptyCloud("centroid of empty cloud")
    return cloud.points.mean(axis=0)


def euler_zyx_to_quat(yaw, pitch, roll):
    """(yaw, pitch, roll) about Z, Y, X -> unit quaternion (qx, qy, qz, qw)."""
    cy, sy = np.cos(yaw / 2.0), np.sin(yaw / 2.0)
    cp, sp = np.cos(pitch / 2.0), np.sin(pitch / 2.0)
    cr, sr = np.cos(roll / 2.0), np.sin(roll / 2.0)
    qw = cr * cp * cy + sr * sp * sy
    qx = sr * cp * cy - cr * sp * sy
    qy = cr * sp * cy + sr * cp * sy
    qz = cr * cp * sy - sr * sp * cy
    return np.array([qx, qy, qz, qw], dtype=np.float64)


def quat_to_euler_zyx(q):
    """Unit quaternion (qx, qy, qz, qw) -> (yaw, pitch, roll), Z-Y-X order."""
    qx, qy, qz, qw = q
    siny = 2.0 * (qw * qz + qx * qy)
    cosy = 1.0 - 2.0 * (qy * qy + qz * qz)
    yaw = np.arctan2(siny, cosy)
    sinp = 2.0 * (qw * qy - qz * qx)
    pitch = np.arcsin(np.clip(sinp, -1.0, 1.0))
    sinr = 2.0 * (qw * qx + qy * qz)
    cosr = 1.0 - 2.0 * (qx * qx + qy * qy)
    roll = np.arctan2(sinr, cosr)
    return float(yaw), float(pitch), float(roll)


@dataclass(frozen=True)
class Pose:
    """6-DOF camera pose at time index t.

    Orientation is held as a unit quaternion (qx, qy, qz, qw); Euler angles
    (pitch, roll, yaw) are derived on demand.
    """

    t: float
    translation: np.ndarray
    quaternion: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0])
    )

    def __post_init__(self):
        object.__setattr__(self, "translation", as_point(self.translation))
        q = np.asarray(self.quaternion, dtype=np.float64).reshape(4)
        norm = float(np.linalg.norm(q))
        if not np.isfinite(norm) or norm < 1e-6:
            raise InvalidParams("quaternion norm too small to normalize")
        if abs(norm - 1.0) > 1e-9:
            q = q / norm
        q = q.copy()
        q.flags.writeable = False
        object.__setattr__(self, "quaternion", q)

    @classmethod
    def from_euler(cls, t, translation, yaw=0.0, pitch=0.0, roll=0.0):
        return cls(t, translation, euler_zyx_to_quat(yaw, pitch, roll))

    @property
    def euler(self):
        """(pitch, roll, yaw), each in (-pi, pi]."""
        yaw, pitch, roll = quat_to_euler_zyx(self.quaternion)
        return pitch, roll, yaw


class Trajectory:
    """Sequence of poses with strictly increasing time indices."""

    __slots__ = ("_poses",)

    def __init__(self, poses):
        poses = tuple(poses)
        for a, b in zip(poses, poses[1:]):
            if not b.t > a.t:
                raise InvalidParams(f"time indices not strictly increasing at t={b.t}")
        self._poses = poses

    @property
    def poses(self):
        return self._poses

    def __len__(self):
        return len(self._poses)

    def __iter__(self):
        return iter(self._poses)

    def __getitem__(self, i):
        return self._poses[i]

    def translations(self):
        """(N, 3) array of pose translations in time order."""
        if not self._poses:
            return np.zeros((0, 3))
        return np.array([p.translation for p in self._poses])

    def times(self):
        return np.array([p.t for p in self._poses])
