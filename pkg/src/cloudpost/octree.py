"""Fixed-depth occupancy octree over a point cloud.

The root cube is the cloud's cubified bounding box inflated by one
resolution unit per side, so every input point is interior. Leaves are
half-open cells [min, max); a point on a shared face belongs to the cell
with larger coordinates, which makes binning bit-deterministic.
"""

import numpy as np

from .errors import EmptyCloud, InvalidResolution
from .geometry import PointCloud, as_point, bounding_box
from .io_formats import write_cloud


class Octree:
    """Occupancy octree with per-leaf point counts."""

    __slots__ = ("root_min", "root_edge", "depth", "leaf_edge", "leaves")

    def __init__(self, root_min, root_edge, depth, leaves):
        self.root_min = np.asarray(root_min, dtype=np.float64)
        self.root_edge = float(root_edge)
        self.depth = int(depth)
        self.leaf_edge = self.root_edge / (1 << self.depth)
        self.leaves = leaves  # {(i, j, k): point count}

    def cell_of(self, p):
        """Leaf index triple of a point, or None outside the root cube."""
        rel = (as_point(p) - self.root_min) / self.leaf_edge
        cell = np.floor(rel).astype(np.int64)
        side = 1 << self.depth
        if np.any(cell < 0) or np.any(cell >= side):
            return None
        return tuple(int(c) for c in cell)

    def is_occupied(self, p):
        cell = self.cell_of(p)
        return cell is not None and cell in self.leaves

    def occupancy_stats(self):
        """(occupied leaf count, free fraction of the full leaf grid)."""
        total = (1 << self.depth) ** 3
        occupied = len(self.leaves)
        return occupied, 1.0 - occupied / total

    def leaf_centers(self):
        """Centers of occupied leaves as a PointCloud (stable cell order)."""
        if not self.leaves:
            return PointCloud(np.zeros((0, 3)))
        cells = np.array(sorted(self.leaves), dtype=np.float64)
        return PointCloud(self.root_min + (cells + 0.5) * self.leaf_edge)

    def write_leaf_list(self, path):
        """One line per occupied leaf: center x y z and edge length."""
        centers = self.leaf_centers().points
        with open(path, "w", newline="\n") as f:
            f.write("# center_x center_y center_z edge\n")
            for c in centers:
                f.write(
                    f"{format(c[0], '.17g')} {format(c[1], '.17g')} "
                    f"{format(c[2], '.17g')} {format(self.leaf_edge, '.17g')}\n"
                )

    def write_centers_ply(self, path):
        write_cloud(self.leaf_centers(), path, fmt="ply")


def build_octree(cloud, resolution):
    """Convert a cloud to its occupancy octree at the given leaf resolution."""
    if len(cloud) == 0:
        raise EmptyCloud("build_octree on empty cloud")
    if not (resolution > 0):
        raise InvalidResolution(f"resolution must be > 0, got {resolution}")
    box = bounding_box(cloud)
    edge = float(max(np.max(box.max - box.min), 0.0)) + 2.0 * resolution
    root_min = box.min - resolution
    depth = 0
    while edge / (1 << depth) > resolution:
        depth += 1
    leaf_edge = edge / (1 << depth)
    cells = np.floor((cloud.points - root_min) / leaf_edge).astype(np.int64)
    leaves = {}
    for c in map(tuple, cells.tolist()):
        leaves[c] = leaves.get(c, 0) + 1
    return Octree(root_min, edge, depth, leaves)


def is_occupied(tree, p):
    return tree.is_occupied(p)


def occupancy_stats(tree):
    return tree.occupancy_stats()
