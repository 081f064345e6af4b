"""Moving-least-squares surface fitting, projection and upsampling.

A local surface is fitted around a query point from its radius neighborhood
with Gaussian distance weights: order 1 is a weighted-PCA plane, order 2
adds a bivariate quadratic height field over the tangent plane. The three
upsamplers (sample-local-plane, random-uniform-density, voxel-grid-dilation)
generate candidate points, project every candidate onto the MLS surface of
the ORIGINAL cloud and deduplicate, so output never depends on generation
order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNeighborhood, EmptyCloud, InvalidParams
from .geometry import PointCloud, as_point
from .spatial import KdTree

# flat neighbor budget per fitting chunk; bounds peak memory of the
# batched normal equations
_FLAT_BUDGET = 300_000
_QUERY_CHUNK = 2048


@dataclass(frozen=True)
class MlsParams:
    search_radius: float
    polynomial_order: int = 1
    gaussian_bandwidth: float | None = None

    def __post_init__(self):
        if not (self.search_radius > 0):
            raise InvalidParams(f"search_radius must be > 0, got {self.search_radius}")
        if self.polynomial_order not in (1, 2):
            raise InvalidParams("polynomial_order must be 1 or 2")
        if self.gaussian_bandwidth is not None and not (self.gaussian_bandwidth > 0):
            raise InvalidParams("gaussian_bandwidth must be > 0")

    @property
    def bandwidth(self):
        return (
            self.gaussian_bandwidth
            if self.gaussian_bandwidth is not None
            else self.search_radius
        )

    @property
    def min_neighbors(self):
        return 3 if self.polynomial_order == 1 else 6


@dataclass(frozen=True)
class SampleLocalPlaneParams:
    u_r: float
    u_sz: float
    u_s: int

    def __post_init__(self):
        if not (self.u_r > 0):
            raise InvalidParams("u_r must be > 0")
        if not (0 < self.u_sz <= self.u_r):
            raise InvalidParams("u_sz must satisfy 0 < u_sz <= u_r")
        if self.u_s < 1:
            raise InvalidParams("u_s must be >= 1")


@dataclass(frozen=True)
class RandomUniformDensityParams:
    d: int
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise InvalidParams("d must be >= 1")
        if self.seed < 0:
            raise InvalidParams("seed must be non-negative")


@dataclass(frozen=True)
class VoxelGridDilationParams:
    s_vs: float
    d_i: int

    def __post_init__(self):
        if not (self.s_vs > 0):
            raise InvalidParams("s_vs must be > 0")
        if self.d_i < 1:
            raise InvalidParams("d_i must be >= 1")


@dataclass(frozen=True)
class LocalFit:
    """Weighted local surface at a query point.

    origin is the Gaussian-weighted neighborhood centroid; (tangent_u,
    tangent_v, normal) is a right-handed orthonormal frame. coeffs holds the
    height field c0 + cu*u + cv*v + cuu*u^2 + cuv*u*v + cvv*v^2 over the
    tangent plane (order 2 only, else None).
    """

    origin: np.ndarray
    normal: np.ndarray
    tangent_u: np.ndarray
    tangent_v: np.ndarray
    coeffs: np.ndarray | None = None


class FitBatch:
    """Vectorized fit results for a batch of query points."""

    __slots__ = ("valid", "origin", "normal", "tangent_u", "tangent_v", "coeffs")

    def __init__(self, q, order):
        self.valid = np.zeros(q, dtype=bool)
        self.origin = np.zeros((q, 3))
        self.normal = np.zeros((q, 3))
        self.tangent_u = np.zeros((q, 3))
        self.tangent_v = np.zeros((q, 3))
        self.coeffs = np.zeros((q, 6)) if order == 2 else None

    def fit_at(self, j):
        if not self.valid[j]:
            return None
        return LocalFit(
            origin=self.origin[j],
            normal=self.normal[j],
            tangent_u=self.tangent_u[j],
            tangent_v=self.tangent_v[j],
            coeffs=None if self.coeffs is None else self.coeffs[j],
        )


def _fix_sign(vecs):
    """Flip each row so its largest-magnitude component is positive."""
    arg = np.argmax(np.abs(vecs), axis=1)
    signs = np.sign(vecs[np.arange(len(vecs)), arg])
    signs[signs == 0] = 1.0
    return vecs * signs[:, None]


def _segment_sums(values, starts):
    return np.add.reduceat(values, starts, axis=0)


def _fit_segment(tree, queries, params, out, base):
    """Fit one compact segment of queries; writes into out at offset base."""
    idx, dist, offsets = tree.radius_batch(queries, params.search_radius)
    counts = np.diff(offsets)
    valid = counts >= params.min_neighbors
    nv = int(valid.sum())
    if nv == 0:
        return
    flat_keep = np.repeat(valid, counts)
    idx = idx[flat_keep]
    dist = dist[flat_keep]
    cnt = counts[valid]
    starts = np.zeros(nv, dtype=np.int64)
    np.cumsum(cnt[:-1], out=starts[1:])
    rep = np.repeat(np.arange(nv), cnt)

    nb = tree.points[idx]
    w = np.exp(-((dist / params.bandwidth) ** 2))
    sw = _segment_sums(w, starts)
    origin = _segment_sums(w[:, None] * nb, starts) / sw[:, None]
    dm = nb - origin[rep]
    wdm = w[:, None] * dm
    cov = _segment_sums(
        (wdm[:, :, None] * dm[:, None, :]).reshape(-1, 9), starts
    ).reshape(-1, 3, 3) / sw[:, None, None]

    evals, evecs = np.linalg.eigh(cov)
    # rank check: collinear/coincident neighborhoods have two ~zero eigenvalues
    scale = np.maximum(evals[:, 2], 0.0)
    nondeg = evals[:, 1] > scale * 1e-10 + 1e-300
    normal = _fix_sign(evecs[:, :, 0])
    tu = _fix_sign(evecs[:, :, 2])
    tv = np.cross(normal, tu)

    if params.polynomial_order == 2:
        u = np.einsum("mk,mk->m", dm, tu[rep])
        v = np.einsum("mk,mk->m", dm, tv[rep])
        hn = np.einsum("mk,mk->m", dm, normal[rep])
        basis = np.stack([np.ones_like(u), u, v, u * u, u * v, v * v], axis=1)
        wb = w[:, None] * basis
        ata = _segment_sums(
            (wb[:, :, None] * basis[:, None, :]).reshape(-1, 36), starts
        ).reshape(-1, 6, 6)
        atb = _segment_sums(wb * hn[:, None], starts)
        coeffs = np.zeros((nv, 6))
        ok = nondeg.copy()
        try:
            coeffs[nondeg] = np.linalg.solve(ata[nondeg], atb[nondeg, :, None])[
                :, :, 0
            ]
        except np.linalg.LinAlgError:
            for j in np.flatnonzero(nondeg):
                try:
                    coeffs[j] = np.linalg.solve(ata[j], atb[j, :, None])[:, 0]
                except np.linalg.LinAlgError:
                    ok[j] = False
        nondeg = ok
    else:
        coeffs = None

    dst = base + np.flatnonzero(valid)
    out.valid[dst] = nondeg
    out.origin[dst] = origin
    out.normal[dst] = normal
    out.tangent_u[dst] = tu
    out.tangent_v[dst] = tv
    if coeffs is not None:
        out.coeffs[dst] = coeffs


def fit_batch(tree, queries, params):
    """Fit local surfaces at many query points (chunked, vectorized)."""
    queries = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 3)
    out = FitBatch(queries.shape[0], params.polynomial_order)
    step = _QUERY_CHUNK
    # shrink the chunk if neighborhoods are dense, to bound flat memory
    for s in range(0, queries.shape[0], step):
        block = queries[s : s + step]
        if block.shape[0] > 1:
            probe, _, _ = tree.radius_batch(block[:1], params.search_radius)
            per_query = max(1, probe.size)
            sub = max(1, min(step, _FLAT_BUDGET // per_query))
        else:
            sub = step
        for t in range(0, block.shape[0], sub):
            _fit_segment(tree, block[t : t + sub], params, out, s + t)
    return out


def fit_local_surface(tree, query, params):
    """Fit the weighted local surface at one query point."""
    batch = fit_batch(tree, as_point(query)[None, :], params)
    fit = batch.fit_at(0)
    if fit is None:
        raise DegenerateNeighborhood(
            f"not enough well-spread neighbors within {params.search_radius} "
            f"of {np.asarray(query)}"
        )
    return fit


def _project_with(batch, points):
    """Project points onto their per-point fitted surfaces (valid rows only)."""
    out = points.copy()
    m = batch.valid
    if not m.any():
        return out
    rel = points[m] - batch.origin[m]
    hu = np.einsum("mk,mk->m", rel, batch.tangent_u[m])
    hv = np.einsum("mk,mk->m", rel, batch.tangent_v[m])
    if batch.coeffs is None:
        height = np.zeros_like(hu)
    else:
        c = batch.coeffs[m]
        height = (
            c[:, 0]
            + c[:, 1] * hu
            + c[:, 2] * hv
            + c[:, 3] * hu * hu
            + c[:, 4] * hu * hv
            + c[:, 5] * hv * hv
        )
    out[m] = (
        batch.origin[m]
        + hu[:, None] * batch.tangent_u[m]
        + hv[:, None] * batch.tangent_v[m]
        + height[:, None] * batch.normal[m]
    )
    return out


def project_batch(tree, points, params):
    """MLS-project many points; returns (projected, valid mask).

    Points with a degenerate neighborhood are returned unchanged with
    valid=False.
    """
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    batch = fit_batch(tree, points, params)
    return _project_with(batch, points), batch.valid


def mls_project(tree, point, params):
    """Project one point onto its local MLS surface."""
    point = as_point(point)
    projected, valid = project_batch(tree, point[None, :], params)
    if not valid[0]:
        raise DegenerateNeighborhood(
            f"cannot project {point}: degenerate neighborhood"
        )
    return projected[0]


def dedup(points, tol):
    """Drop points that share a grid cell of edge tol, keeping first seen."""
    if len(points) == 0 or not (tol > 0):
        return np.asarray(points, dtype=np.float64).reshape(-1, 3)
    keys = np.floor(np.asarray(points) / tol).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return np.asarray(points)[np.sort(first)]


def _projected_originals(cloud, tree, params, project_originals):
    if not project_originals:
        return cloud.points.copy()
    projected, _ = project_batch(tree, cloud.points, params)
    return projected


def upsample_sample_local_plane(cloud, mls, p, project_originals=True):
    """Densify by sampling polar rings on each point's fitted local plane.

    Rings at radii u_sz, 2*u_sz, ... up to min(u_r, u_s*u_sz) around each
    point's plane projection, with arc steps of about u_sz; every candidate
    is MLS-projected against the original cloud. Output is deduplicated at
    u_sz / 2.
    """
    if len(cloud) == 0:
        raise EmptyCloud("upsample_sample_local_plane on empty cloud")
    tree = KdTree(cloud)
    batch = fit_batch(tree, cloud.points, mls)
    projected = _project_with(batch, cloud.points)
    base = projected if project_originals else cloud.points.copy()

    n_rings = min(p.u_s, int(np.floor(p.u_r / p.u_sz + 1e-12)))
    m = batch.valid
    centers = projected[m]
    tu = batch.tangent_u[m]
    tv = batch.tangent_v[m]
    candidates = []
    for ring in range(1, n_rings + 1):
        rho = ring * p.u_sz
        n_ang = max(1, int(round(2.0 * np.pi * rho / p.u_sz)))
        ang = 2.0 * np.pi * np.arange(n_ang) / n_ang
        ring_pts = (
            centers[:, None, :]
            + rho * np.cos(ang)[None, :, None] * tu[:, None, :]
            + rho * np.sin(ang)[None, :, None] * tv[:, None, :]
        )
        candidates.append(ring_pts.reshape(-1, 3))
    if candidates:
        cand = np.concatenate(candidates)
        projected, valid = project_batch(tree, cand, mls)
        new_pts = projected[valid]
    else:
        new_pts = np.zeros((0, 3))
    out = np.concatenate([base, new_pts])
    return PointCloud(dedup(out, p.u_sz / 2.0))


def upsample_random_uniform_density(cloud, mls, p, project_originals=True):
    """Raise each neighborhood to at least d points within search_radius.

    For every input point whose ball of radius search_radius holds fewer
    than d points (itself included), uniform samples are drawn in the
    tangent disc around its plane projection and MLS-projected. Each point's
    random stream derives from (seed, point index), so the result is
    reproducible and order-independent.
    """
    if len(cloud) == 0:
        raise EmptyCloud("upsample_random_uniform_density on empty cloud")
    tree = KdTree(cloud)
    batch = fit_batch(tree, cloud.points, mls)
    projected = _project_with(batch, cloud.points)
    base = projected if project_originals else cloud.points.copy()

    _, _, offsets = tree.radius_batch(cloud.points, mls.search_radius)
    counts = np.diff(offsets)
    candidates = []
    for i in np.flatnonzero(batch.valid & (counts < p.d)):
        need = int(p.d - counts[i])
        rng = np.random.default_rng([p.seed, int(i)])
        radii = mls.search_radius * np.sqrt(rng.random(need))
        theta = 2.0 * np.pi * rng.random(need)
        disc = (
            projected[i]
            + (radii * np.cos(theta))[:, None] * batch.tangent_u[i]
            + (radii * np.sin(theta))[:, None] * batch.tangent_v[i]
        )
        candidates.append(disc)
    if candidates:
        cand = np.concatenate(candidates)
        projected, valid = project_batch(tree, cand, mls)
        new_pts = projected[valid]
    else:
        new_pts = np.zeros((0, 3))
    return PointCloud(np.concatenate([base, new_pts]))


# 21 bits per axis, biased; voxel coordinates must stay within +/- 2^20
_VOXEL_BIAS = 1 << 20
_VOXEL_MASK = (1 << 21) - 1


def _pack_voxels(cells):
    cells = np.asarray(cells, dtype=np.int64)
    if cells.size and np.abs(cells).max() >= _VOXEL_BIAS:
        raise InvalidParams("voxel grid too large to index (>2^20 cells per axis)")
    b = cells + _VOXEL_BIAS
    return (b[:, 0] << 42) | (b[:, 1] << 21) | b[:, 2]


def _unpack_voxels(keys):
    x = (keys >> 42) - _VOXEL_BIAS
    y = ((keys >> 21) & _VOXEL_MASK) - _VOXEL_BIAS
    z = (keys & _VOXEL_MASK) - _VOXEL_BIAS
    return np.stack([x, y, z], axis=1)


def dilate_voxels(cells, iterations):
    """Morphological 26-neighborhood dilation of an integer voxel set."""
    if iterations < 0:
        raise InvalidParams("iterations must be >= 0")
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
    if cells.shape[0] == 0:
        return cells
    keys = np.unique(_pack_voxels(cells))
    d = np.array([-1, 0, 1], dtype=np.int64)
    off = np.stack(np.meshgrid(d, d, d, indexing="ij"), axis=-1).reshape(-1, 3)
    off_keys = (off[:, 0] << 42) + (off[:, 1] << 21) + off[:, 2]
    for _ in range(iterations):
        keys = np.unique((keys[:, None] + off_keys[None, :]).ravel())
    return _unpack_voxels(keys)


def upsample_voxel_grid_dilation(cloud, mls, p, project_originals=True):
    """Densify by dilating the occupied voxel set and projecting new centers.

    The cloud is voxelized at edge s_vs, dilated d_i times with the
    26-neighborhood, and each newly occupied voxel center is MLS-projected
    onto the original cloud's surface. Projected centers whose nearest
    original point is farther than search_radius are discarded so dilation
    cannot grow geometry into free space. Output is deduplicated at s_vs/2.
    """
    if len(cloud) == 0:
        raise EmptyCloud("upsample_voxel_grid_dilation on empty cloud")
    tree = KdTree(cloud)
    origin = cloud.points.min(axis=0)
    occ = np.unique(
        np.floor((cloud.points - origin) / p.s_vs).astype(np.int64), axis=0
    )
    dilated = dilate_voxels(occ, p.d_i)
    new_keys = np.setdiff1d(
        _pack_voxels(dilated), _pack_voxels(occ), assume_unique=True
    )
    centers = origin + (_unpack_voxels(new_keys) + 0.5) * p.s_vs

    base = _projected_originals(cloud, tree, mls, project_originals)
    if centers.shape[0]:
        projected, valid = project_batch(tree, centers, mls)
        new_pts = projected[valid]
        if new_pts.shape[0]:
            _, dist, _ = tree.knn_batch(new_pts, 1)
            new_pts = new_pts[dist[:, 0] <= mls.search_radius]
    else:
        new_pts = np.zeros((0, 3))
    out = np.concatenate([base, new_pts])
    return PointCloud(dedup(out, p.s_vs / 2.0))
