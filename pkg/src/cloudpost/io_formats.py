"""Deterministic ASCII readers/writers for clouds and trajectories.

Supported cloud formats: whitespace-separated XYZ and ASCII PLY with x/y/z
vertex properties. Trajectories use the common SLAM benchmark line format
"t x y z qx qy qz qw" with '#' comments. Floats are serialized with 17
significant digits so write -> read round-trips exactly.
"""

import math
import warnings

from .errors import (
    EmptyTrajectory,
    NonMonotoneTimestamps,
    ParseError,
    UnsupportedFormat,
)
from .geometry import PointCloud, Pose, Trajectory


def _fmt(x):
    return format(float(x), ".17g")


def _detect_format(path, fmt=None):
    if fmt is not None:
        fmt = fmt.lower()
        if fmt not in ("ply", "xyz"):
            raise UnsupportedFormat(f"unknown cloud format {fmt!r}")
        return fmt
    name = str(path).lower()
    if name.endswith(".ply"):
        return "ply"
    if name.endswith(".xyz") or name.endswith(".txt"):
        return "xyz"
    raise UnsupportedFormat(f"cannot infer cloud format from {path!r}")


def _parse_floats(path, lineno, parts, expected):
    if len(parts) < expected:
        raise ParseError(path, lineno, f"expected {expected} columns, got {len(parts)}")
    try:
        vals = [float(p) for p in parts[:expected]]
    except ValueError as exc:
        raise ParseError(path, lineno, str(exc)) from None
    for v in vals:
        if not math.isfinite(v):
            raise ParseError(path, lineno, f"non-finite value {v}")
    return vals


def _read_xyz(path):
    points = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            points.append(_parse_floats(path, lineno, line.split(), 3))
    return PointCloud(points)


def _read_ply(path):
    with open(path) as f:
        lines = f.readlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(path, 1, "missing 'ply' magic")
    n_vertices = None
    props = []
    in_vertex = False
    body_start = None
    for lineno, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens:
            continue
        if tokens[0] == "format":
            if tokens[1:2] != ["ascii"]:
                raise UnsupportedFormat(f"{path}: only ascii PLY is supported")
        elif tokens[0] == "element":
            if tokens[1] == "vertex":
                in_vertex = True
                try:
                    n_vertices = int(tokens[2])
                except (IndexError, ValueError):
                    raise ParseError(path, lineno, "bad vertex count") from None
            else:
                in_vertex = False
                raise UnsupportedFormat(
                    f"{path}: unsupported element {tokens[1]!r} (vertices only)"
                )
        elif tokens[0] == "property" and in_vertex:
            props.append(tokens[-1])
        elif tokens[0] == "end_header":
            body_start = lineno
            break
    if body_start is None or n_vertices is None:
        raise ParseError(path, len(lines), "incomplete PLY header")
    try:
        cols = [props.index(c) for c in ("x", "y", "z")]
    except ValueError:
        raise UnsupportedFormat(f"{path}: vertex element lacks x/y/z") from None

    points = []
    lineno = body_start
    for raw in lines[body_start:]:
        lineno += 1
        parts = raw.split()
        if not parts:
            continue
        vals = _parse_floats(path, lineno, parts, len(props))
        points.append([vals[c] for c in cols])
        if len(points) == n_vertices:
            break
    if len(points) != n_vertices:
        raise ParseError(path, lineno, f"expected {n_vertices} vertices, got {len(points)}")
    return PointCloud(points)


def read_cloud(path, fmt=None):
    """Read a point cloud; format inferred from the extension unless given."""
    fmt = _detect_format(path, fmt)
    return _read_ply(path) if fmt == "ply" else _read_xyz(path)


def write_cloud(cloud, path, fmt=None):
    """Write a cloud with deterministic byte output ('\\n' endings)."""
    fmt = _detect_format(path, fmt)
    with open(path, "w", newline="\n") as f:
        if fmt == "ply":
            f.write("ply\nformat ascii 1.0\n")
            f.write(f"element vertex {len(cloud)}\n")
            f.write("property double x\nproperty double y\nproperty double z\n")
            f.write("end_header\n")
        for p in cloud.points:
            f.write(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n")


def read_trajectory(path):
    """Read poses from 't x y z qx qy qz qw' lines, '#' comments skipped."""
    poses = []
    last_t = None
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            t, x, y, z, qx, qy, qz, qw = _parse_floats(path, lineno, line.split(), 8)
            if last_t is not None and t <= last_t:
                raise NonMonotoneTimestamps(
                    f"{path}:{lineno}: timestamp {t} not after {last_t}"
                )
            last_t = t
            norm = math.sqrt(qx * qx + qy * qy + qz * qz + qw * qw)
            if norm < 1e-6:
                raise ParseError(path, lineno, "zero-norm quaternion")
            if abs(norm - 1.0) > 1e-6:
                warnings.warn(
                    f"{path}:{lineno}: quaternion norm {norm:.9f} != 1, normalizing"
                )
            poses.append(Pose(t, (x, y, z), (qx, qy, qz, qw)))
    if not poses:
        raise EmptyTrajectory(f"{path}: no poses")
    return Trajectory(poses)


def write_trajectory(traj, path):
    """Write a trajectory in 't x y z qx qy qz qw' format."""
    with open(path, "w", newline="\n") as f:
        f.write("# t x y z qx qy qz qw\n")
        for p in traj:
            tx, ty, tz = p.translation
            qx, qy, qz, qw = p.quaternion
            f.write(
                f"{_fmt(p.t)} {_fmt(tx)} {_fmt(ty)} {_fmt(tz)} "
                f"{_fmt(qx)} {_fmt(qy)} {_fmt(qz)} {_fmt(qw)}\n"
            )
