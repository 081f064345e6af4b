"""cloudpost: post-processing for sparse vSLAM point-cloud maps.

Filtering (radius / statistical outlier removal), MLS-based upsampling,
scale alignment against ground truth, occupancy octrees, synthetic scenes
and a parameter-sweep benchmark harness.
"""

from .geometry import AABB, PointCloud, Pose, Trajectory, bounding_box, centroid
from .spatial import KdTree

__version__ = "0.1.0"

__all__ = [
    "AABB",
    "KdTree",
    "PointCloud",
    "Pose",
    "Trajectory",
    "bounding_box",
    "centroid",
    "__version__",
]
