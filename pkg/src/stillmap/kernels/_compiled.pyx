# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython implementations of the per-point hot kernels.

Semantics mirror stillmap.kernels._reference exactly: closed range tests,
upper-boundary clamp to the last voxel, centroid accumulation in stable
lexicographic key order.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, fabs, floor, hypot, sin, M_PI

cnp.import_array()


def obb_mask(const double[:, ::1] xyz, const double[::1] center, double yaw,
             const double[::1] half_extents, double margin):
    cdef Py_ssize_t n = xyz.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] o = out
    cdef double c = cos(yaw), s = sin(yaw)
    cdef double hx = half_extents[0] + margin
    cdef double hy = half_extents[1] + margin
    cdef double hz = half_extents[2] + margin
    cdef double cx = center[0], cy = center[1], cz = center[2]
    cdef double dx, dy, dz
    cdef Py_ssize_t i
    for i in range(n):
        dx = xyz[i, 0] - cx
        dy = xyz[i, 1] - cy
        dz = xyz[i, 2] - cz
        if fabs(c * dx + s * dy) <= hx and fabs(-s * dx + c * dy) <= hy and fabs(dz) <= hz:
            o[i] = 1
    return out.view(np.bool_)


def any_obb_mask(const double[:, ::1] xyz, const double[:, ::1] centers,
                 const double[::1] yaws, const double[:, ::1] half_extents,
                 double margin):
    cdef Py_ssize_t n = xyz.shape[0]
    cdef Py_ssize_t nb = centers.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] o = out
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cb = np.cos(np.asarray(yaws))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sb = np.sin(np.asarray(yaws))
    cdef double[::1] cbv = cb, sbv = sb
    cdef double dx, dy, dz, c, s
    cdef Py_ssize_t i, b
    for i in range(n):
        for b in range(nb):
            dx = xyz[i, 0] - centers[b, 0]
            dy = xyz[i, 1] - centers[b, 1]
            dz = xyz[i, 2] - centers[b, 2]
            c = cbv[b]
            s = sbv[b]
            if (fabs(c * dx + s * dy) <= half_extents[b, 0] + margin
                    and fabs(-s * dx + c * dy) <= half_extents[b, 1] + margin
                    and fabs(dz) <= half_extents[b, 2] + margin):
                o[i] = 1
                break
    return out.view(np.bool_)


def voxel_centroids(const double[:, ::1] xyz, intensity,
                    const double[::1] min_bound, const double[::1] max_bound,
                    const double[::1] voxel_size, const long long[::1] dims):
    cdef Py_ssize_t n = xyz.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] keys_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] keys = keys_arr
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] inside_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] inside = inside_arr
    cdef double x, y, z
    cdef long long ix, iy, iz
    cdef Py_ssize_t i
    cdef Py_ssize_t m = 0
    for i in range(n):
        x = xyz[i, 0]
        y = xyz[i, 1]
        z = xyz[i, 2]
        if (min_bound[0] <= x <= max_bound[0]
                and min_bound[1] <= y <= max_bound[1]
                and min_bound[2] <= z <= max_bound[2]):
            ix = <long long>floor((x - min_bound[0]) / voxel_size[0])
            iy = <long long>floor((y - min_bound[1]) / voxel_size[1])
            iz = <long long>floor((z - min_bound[2]) / voxel_size[2])
            if ix >= dims[0]:
                ix = dims[0] - 1
            if iy >= dims[1]:
                iy = dims[1] - 1
            if iz >= dims[2]:
                iz = dims[2] - 1
            inside[i] = 1
            keys[i] = (ix * dims[1] + iy) * dims[2] + iz
            m += 1

    has_intensity = intensity is not None
    if m == 0:
        return (np.zeros((0, 3)), np.zeros(0) if has_intensity else None,
                np.zeros(0, dtype=np.int64))

    in_idx = np.flatnonzero(inside_arr)
    kept_keys = keys_arr[in_idx]
    order = np.argsort(kept_keys, kind="stable")
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sk_arr = np.ascontiguousarray(kept_keys[order])
    cdef cnp.ndarray[cnp.int64_t, ndim=1] src_arr = np.ascontiguousarray(in_idx[order])
    cdef cnp.int64_t[::1] sk = sk_arr
    cdef cnp.int64_t[::1] src = src_arr

    # one pass to count occupied voxels
    cdef Py_ssize_t ncells = 1
    for i in range(1, m):
        if sk[i] != sk[i - 1]:
            ncells += 1

    cdef cnp.ndarray[cnp.float64_t, ndim=2] cent_arr = np.zeros((ncells, 3))
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_keys_arr = np.empty(ncells, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] inten_sum_arr = np.zeros(ncells)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts_arr = np.zeros(ncells, dtype=np.int64)
    cdef double[:, ::1] cent = cent_arr
    cdef cnp.int64_t[::1] out_keys = out_keys_arr
    cdef double[::1] inten_sum = inten_sum_arr
    cdef cnp.int64_t[::1] counts = counts_arr

    cdef const double[::1] inten
    cdef bint with_inten = has_intensity
    if with_inten:
        inten = np.ascontiguousarray(intensity, dtype=np.float64)

    cdef Py_ssize_t cell = -1
    cdef Py_ssize_t j
    for i in range(m):
        if cell < 0 or sk[i] != out_keys[cell]:
            cell += 1
            out_keys[cell] = sk[i]
        j = src[i]
        cent[cell, 0] += xyz[j, 0]
        cent[cell, 1] += xyz[j, 1]
        cent[cell, 2] += xyz[j, 2]
        if with_inten:
            inten_sum[cell] += inten[j]
        counts[cell] += 1

    for i in range(ncells):
        cent[i, 0] /= counts[i]
        cent[i, 1] /= counts[i]
        cent[i, 2] /= counts[i]
        if with_inten:
            inten_sum[i] /= counts[i]

    return cent_arr, (inten_sum_arr if with_inten else None), out_keys_arr


def scan_context_matrix(const double[:, ::1] xyz, int num_rings, int num_sectors,
                        double max_radius):
    cdef Py_ssize_t n = xyz.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_arr = np.full(
        (num_rings, num_sectors), -np.inf)
    cdef double[:, ::1] out = out_arr
    cdef double ring_scale = num_rings / max_radius
    cdef double sector_scale = num_sectors / (2.0 * M_PI)
    cdef double r, az, z
    cdef long long ring, sector
    cdef Py_ssize_t i
    for i in range(n):
        r = hypot(xyz[i, 0], xyz[i, 1])
        if r >= max_radius:
            continue
        ring = <long long>floor(r * ring_scale)
        if ring >= num_rings:
            ring = num_rings - 1
        az = atan2(xyz[i, 1], xyz[i, 0])
        sector = <long long>floor((az + M_PI) * sector_scale)
        sector = sector % num_sectors
        z = xyz[i, 2]
        if z > out[ring, sector]:
            out[ring, sector] = z
    return out_arr
