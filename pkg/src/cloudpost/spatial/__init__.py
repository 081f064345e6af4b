"""Exact kd-tree neighbor search over point clouds.

The tree is built once in numpy (median split, cycling axis) and flattened
into arrays; queries run through a Cython kernel when the compiled extension
is available, otherwise through a numpy brute-force fallback with identical
results. Set CLOUDPOST_PURE_KERNELS=1 to force the fallback.

All queries are exact. Results are ordered by ascending distance with ties
broken by lower point index, so every downstream filter is deterministic.
"""

import os

import numpy as np

from ..errors import InvalidParams, InvalidRadius
from ..geometry import PointCloud, as_point

from . import _py_kernels

try:
    from . import _kernels
except ImportError:  # extension not built; fall back silently
    _kernels = None

if _kernels is not None and not os.environ.get("CLOUDPOST_PURE_KERNELS"):
    _backend = _kernels
else:
    _backend = _py_kernels

HAVE_COMPILED_KERNELS = _kernels is not None
USING_COMPILED_KERNELS = _backend is not _py_kernels


def build_tree_arrays(pts):
    """Flatten a median-split kd-tree over pts into parallel node arrays.

    Returns (axis, point_index, left, right, root). Split axis cycles with
    depth; the median point (ties by index) is stored at the node. The build
    is fully deterministic.
    """
    n = pts.shape[0]
    axis = np.zeros(n, dtype=np.int32)
    pidx = np.zeros(n, dtype=np.int64)
    left = np.full(n, -1, dtype=np.int32)
    right = np.full(n, -1, dtype=np.int32)
    if n == 0:
        return axis, pidx, left, right, -1
    counter = [0]

    def build(indices, depth):
        if indices.size == 0:
            return -1
        a = depth % 3
        order = indices[np.lexsort((indices, pts[indices, a]))]
        m = order.size // 2
        node = counter[0]
        counter[0] += 1
        axis[node] = a
        pidx[node] = order[m]
        left[node] = build(order[:m], depth + 1)
        right[node] = build(order[m + 1 :], depth + 1)
        return node

    root = build(np.arange(n, dtype=np.int64), 0)
    return axis, pidx, left, right, root


class KdTree:
    """Read-only exact spatial index over a PointCloud."""

    def __init__(self, cloud, backend=None):
        if isinstance(cloud, PointCloud):
            self.cloud = cloud
        else:
            self.cloud = PointCloud(cloud)
        self._pts = np.ascontiguousarray(self.cloud.points)
        (self._axis, self._pidx, self._left, self._right, self._root) = (
            build_tree_arrays(self._pts)
        )
        self._backend = backend if backend is not None else _backend

    def __len__(self):
        return self._pts.shape[0]

    @property
    def points(self):
        return self._pts

    def knn_batch(self, queries, k):
        """k nearest indexed points for each query row.

        Returns (idx (q, k_eff), dist (q, k_eff), counts (q,)); rows are
        ascending by distance, ties by lower index; k_eff = min(k, len(tree)).
        """
        if k < 1:
            raise InvalidParams("k must be >= 1")
        queries = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
        idx, d2, counts = self._backend.knn_batch(
            self._pts, self._axis, self._pidx, self._left, self._right,
            self._root, queries, int(k),
        )
        return np.asarray(idx), np.sqrt(np.asarray(d2)), np.asarray(counts)

    def radius_batch(self, queries, r):
        """All indexed points within distance r (inclusive) of each query.

        Returns (idx_flat, dist_flat, offsets) with query j's neighbors in
        slots offsets[j]:offsets[j+1], ascending by distance, ties by index.
        """
        if not (r > 0):
            raise InvalidRadius(f"radius must be > 0, got {r}")
        queries = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
        idx, d2, offsets = self._backend.radius_batch(
            self._pts, self._axis, self._pidx, self._left, self._right,
            self._root, queries, float(r),
        )
        idx = np.asarray(idx)
        d2 = np.asarray(d2)
        offsets = np.asarray(offsets)
        if idx.size:
            seg = np.repeat(np.arange(offsets.size - 1), np.diff(offsets))
            order = np.lexsort((idx, d2, seg))
            idx = idx[order]
            d2 = d2[order]
        return idx, np.sqrt(d2), offsets

    def knn(self, query, k):
        """k nearest neighbors of one query point as [(index, distance)]."""
        idx, dist, counts = self.knn_batch(as_point(query)[None, :], k)
        c = int(counts[0])
        return list(zip(idx[0, :c].tolist(), dist[0, :c].tolist()))

    def radius_search(self, query, r):
        """Neighbors within r of one query point as [(index, distance)]."""
        idx, dist, offsets = self.radius_batch(as_point(query)[None, :], r)
        return list(zip(idx.tolist(), dist.tolist()))


def build(cloud):
    """Index a cloud (possibly empty) for exact neighbor queries."""
    return KdTree(cloud)
