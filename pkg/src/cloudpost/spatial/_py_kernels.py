"""Pure-python (numpy) query kernels.

Drop-in fallback for the compiled extension: same signatures, bit-identical
results. Queries are answered by chunked brute-force scans, which are exact
by construction; the kd-tree arrays are accepted and ignored.
"""

import numpy as np

COMPILED = False

# queries per chunk; bounds the (chunk, n) distance matrix
_CHUNK = 256


def _d2_chunk(pts, queries):
    # squared-difference sum, accumulated left-to-right to stay bit-identical
    # with the compiled kernel's dx*dx + dy*dy + dz*dz
    diff = queries[:, None, :] - pts[None, :, :]
    return np.square(diff).sum(axis=-1)


def knn_batch(pts, axis, pidx, left, right, root, queries, k):
    """k nearest points per query, ties broken by lower point index.

    Returns (idx (q, k_eff) int64, d2 (q, k_eff) float64, counts (q,) int64)
    with unused slots set to -1 / inf.
    """
    n = pts.shape[0]
    q = queries.shape[0]
    k_eff = min(k, n)
    out_idx = np.full((q, max(k_eff, 0)), -1, dtype=np.int64)
    out_d2 = np.full((q, max(k_eff, 0)), np.inf)
    counts = np.full(q, k_eff, dtype=np.int64)
    if n == 0 or q == 0 or k_eff == 0:
        return out_idx, out_d2, counts
    for s in range(0, q, _CHUNK):
        qc = queries[s : s + _CHUNK]
        d2 = _d2_chunk(pts, qc)
        # stable sort keeps lower indices first among equal distances
        order = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
        out_idx[s : s + _CHUNK] = order
        out_d2[s : s + _CHUNK] = np.take_along_axis(d2, order, axis=1)
    return out_idx, out_d2, counts


def radius_batch(pts, axis, pidx, left, right, root, queries, r):
    """All points with distance <= r per query.

    Returns (idx_flat int64, d2_flat float64, offsets (q+1,) int64); segment
    ordering within a query is unspecified (callers sort by (d2, index)).
    """
    n = pts.shape[0]
    q = queries.shape[0]
    r2 = r * r
    if n == 0 or q == 0:
        return (
            np.zeros(0, dtype=np.int64),
            np.zeros(0),
            np.zeros(q + 1, dtype=np.int64),
        )
    idx_parts = []
    d2_parts = []
    counts = np.zeros(q, dtype=np.int64)
    for s in range(0, q, _CHUNK):
        qc = queries[s : s + _CHUNK]
        d2 = _d2_chunk(pts, qc)
        hits = d2 <= r2
        counts[s : s + _CHUNK] = hits.sum(axis=1)
        rows, cols = np.nonzero(hits)
        idx_parts.append(cols.astype(np.int64))
        d2_parts.append(d2[rows, cols])
    offsets = np.zeros(q + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return np.concatenate(idx_parts), np.concatenate(d2_parts), offsets
