# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kd-tree query kernels.

Traverses the array-encoded tree built by cloudpost.spatial. Results are
bit-identical to the pure-python fallback: squared distances accumulate as
dx*dx + dy*dy + dz*dz and k-nearest ties break on the lower point index.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

ctypedef cnp.int64_t i64
ctypedef cnp.int32_t i32

COMPILED = True


cdef inline double _d2(const double[:, ::1] pts, Py_ssize_t i,
                       double qx, double qy, double qz) noexcept nogil:
    cdef double dx = qx - pts[i, 0]
    cdef double dy = qy - pts[i, 1]
    cdef double dz = qz - pts[i, 2]
    return dx * dx + dy * dy + dz * dz


cdef void _knn_rec(const double[:, ::1] pts, const i32[::1] ax,
                   const i64[::1] pidx, const i32[::1] lc, const i32[::1] rc,
                   int node, double qx, double qy, double qz, int k,
                   double* bd2, i64* bidx, int* count) noexcept nogil:
    if node < 0:
        return
    cdef i64 i = pidx[node]
    cdef double d2 = _d2(pts, i, qx, qy, qz)
    cdef int c = count[0]
    cdef int pos
    cdef bint take
    if c < k:
        take = True
    else:
        take = d2 < bd2[k - 1] or (d2 == bd2[k - 1] and i < bidx[k - 1])
    if take:
        if c < k:
            pos = c
            count[0] = c + 1
        else:
            pos = k - 1
        while pos > 0 and (bd2[pos - 1] > d2 or
                           (bd2[pos - 1] == d2 and bidx[pos - 1] > i)):
            bd2[pos] = bd2[pos - 1]
            bidx[pos] = bidx[pos - 1]
            pos -= 1
        bd2[pos] = d2
        bidx[pos] = i

    cdef int a = ax[node]
    cdef double qa = qx if a == 0 else (qy if a == 1 else qz)
    cdef double diff = qa - pts[i, a]
    cdef int near, far
    if diff < 0:
        near = lc[node]
        far = rc[node]
    else:
        near = rc[node]
        far = lc[node]
    _knn_rec(pts, ax, pidx, lc, rc, near, qx, qy, qz, k, bd2, bidx, count)
    # descend on equality too: a far-side tie with a lower index still wins
    if count[0] < k or diff * diff <= bd2[k - 1]:
        _knn_rec(pts, ax, pidx, lc, rc, far, qx, qy, qz, k, bd2, bidx, count)


cdef i64 _radius_count_rec(const double[:, ::1] pts, const i32[::1] ax,
                           const i64[::1] pidx, const i32[::1] lc,
                           const i32[::1] rc, int node,
                           double qx, double qy, double qz,
                           double r2) noexcept nogil:
    if node < 0:
        return 0
    cdef i64 i = pidx[node]
    cdef i64 total = 0
    if _d2(pts, i, qx, qy, qz) <= r2:
        total += 1
    cdef int a = ax[node]
    cdef double qa = qx if a == 0 else (qy if a == 1 else qz)
    cdef double diff = qa - pts[i, a]
    cdef int near, far
    if diff < 0:
        near = lc[node]
        far = rc[node]
    else:
        near = rc[node]
        far = lc[node]
    total += _radius_count_rec(pts, ax, pidx, lc, rc, near, qx, qy, qz, r2)
    if diff * diff <= r2:
        total += _radius_count_rec(pts, ax, pidx, lc, rc, far, qx, qy, qz, r2)
    return total


cdef void _radius_fill_rec(const double[:, ::1] pts, const i32[::1] ax,
                           const i64[::1] pidx, const i32[::1] lc,
                           const i32[::1] rc, int node,
                           double qx, double qy, double qz, double r2,
                           i64[::1] out_idx, double[::1] out_d2,
                           i64* cursor) noexcept nogil:
    if node < 0:
        return
    cdef i64 i = pidx[node]
    cdef double d2 = _d2(pts, i, qx, qy, qz)
    if d2 <= r2:
        out_idx[cursor[0]] = i
        out_d2[cursor[0]] = d2
        cursor[0] += 1
    cdef int a = ax[node]
    cdef double qa = qx if a == 0 else (qy if a == 1 else qz)
    cdef double diff = qa - pts[i, a]
    cdef int near, far
    if diff < 0:
        near = lc[node]
        far = rc[node]
    else:
        near = rc[node]
        far = lc[node]
    _radius_fill_rec(pts, ax, pidx, lc, rc, near, qx, qy, qz, r2,
                     out_idx, out_d2, cursor)
    if diff * diff <= r2:
        _radius_fill_rec(pts, ax, pidx, lc, rc, far, qx, qy, qz, r2,
                         out_idx, out_d2, cursor)


def knn_batch(const double[:, ::1] pts, const i32[::1] axis,
              const i64[::1] pidx, const i32[::1] left, const i32[::1] right,
              int root, const double[:, ::1] queries, int k):
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t q = queries.shape[0]
    cdef int k_eff = min(k, <int> n)
    out_idx_arr = np.full((q, max(k_eff, 0)), -1, dtype=np.int64)
    out_d2_arr = np.full((q, max(k_eff, 0)), np.inf)
    counts_arr = np.zeros(q, dtype=np.int64)
    if n == 0 or q == 0 or k_eff == 0:
        counts_arr[:] = 0
        return out_idx_arr, out_d2_arr, counts_arr
    cdef i64[:, ::1] out_idx = out_idx_arr
    cdef double[:, ::1] out_d2 = out_d2_arr
    cdef i64[::1] counts = counts_arr
    cdef Py_ssize_t j
    cdef int count
    with nogil:
        for j in range(q):
            count = 0
            _knn_rec(pts, axis, pidx, left, right, root,
                     queries[j, 0], queries[j, 1], queries[j, 2],
                     k_eff, &out_d2[j, 0], &out_idx[j, 0], &count)
            counts[j] = count
    return out_idx_arr, out_d2_arr, counts_arr


def radius_batch(const double[:, ::1] pts, const i32[::1] axis,
                 const i64[::1] pidx, const i32[::1] left,
                 const i32[::1] right, int root,
                 const double[:, ::1] queries, double r):
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t q = queries.shape[0]
    cdef double r2 = r * r
    offsets_arr = np.zeros(q + 1, dtype=np.int64)
    if n == 0 or q == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0), offsets_arr
    cdef i64[::1] offsets = offsets_arr
    cdef Py_ssize_t j
    with nogil:
        for j in range(q):
            offsets[j + 1] = offsets[j] + _radius_count_rec(
                pts, axis, pidx, left, right, root,
                queries[j, 0], queries[j, 1], queries[j, 2], r2)
    cdef i64 total = offsets[q]
    idx_arr = np.empty(total, dtype=np.int64)
    d2_arr = np.empty(total, dtype=np.float64)
    cdef i64[::1] idx_flat = idx_arr
    cdef double[::1] d2_flat = d2_arr
    cdef i64 cursor = 0
    with nogil:
        for j in range(q):
            _radius_fill_rec(pts, axis, pidx, left, right, root,
                             queries[j, 0], queries[j, 1], queries[j, 2], r2,
                             idx_flat, d2_flat, &cursor)
    return idx_arr, d2_arr, offsets_arr
