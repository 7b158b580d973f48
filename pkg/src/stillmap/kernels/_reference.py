"""Pure-NumPy implementations of the per-point hot kernels.

Semantics are shared with the compiled backend: closed intervals on both
ends of every range test, upper-boundary voxel indices clamped to the last
cell, and voxel centroids accumulated in stable lexicographic key order.
"""

from __future__ import annotations

import numpy as np


def obb_mask(xyz, center, yaw, half_extents, margin):
    """Boolean mask of points inside one yaw-oriented box (closed test)."""
    c = np.cos(yaw)
    s = np.sin(yaw)
    dx = xyz[:, 0] - center[0]
    dy = xyz[:, 1] - center[1]
    dz = xyz[:, 2] - center[2]
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    return (
        (np.abs(lx) <= half_extents[0] + margin)
        & (np.abs(ly) <= half_extents[1] + margin)
        & (np.abs(dz) <= half_extents[2] + margin)
    )


def any_obb_mask(xyz, centers, yaws, half_extents, margin):
    """Mask of points inside at least one of the boxes."""
    out = np.zeros(xyz.shape[0], dtype=bool)
    for b in range(centers.shape[0]):
        out |= obb_mask(xyz, centers[b], yaws[b], half_extents[b], margin)
    return out


def voxel_centroids(xyz, intensity, min_bound, max_bound, voxel_size, dims):
    """Per-voxel centroids of in-range points, ordered by (i, j, k).

    Returns (centroids, intensity_means_or_None, occupied_keys).
    """
    inside = np.logical_and(xyz >= min_bound, xyz <= max_bound).all(axis=1)
    pts = xyz[inside]
    if pts.shape[0] == 0:
        return (
            np.zeros((0, 3)),
            None if intensity is None else np.zeros(0),
            np.zeros(0, dtype=np.int64),
        )
    idx = np.floor((pts - min_bound) / voxel_size).astype(np.int64)
    np.minimum(idx, dims - 1, out=idx)
    keys = (idx[:, 0] * dims[1] + idx[:, 1]) * dims[2] + idx[:, 2]
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    sp = pts[order]
    starts = np.concatenate(([0], np.flatnonzero(np.diff(sk)) + 1))
    counts = np.diff(np.concatenate((starts, [sk.shape[0]])))
    sums = np.add.reduceat(sp, starts, axis=0)
    cent = sums / counts[:, None]
    inten_out = None
    if intensity is not None:
        si = intensity[inside][order]
        inten_out = np.add.reduceat(si, starts) / counts
    return cent, inten_out, sk[starts]


def scan_context_matrix(xyz, num_rings, num_sectors, max_radius):
    """Max z per (ring, sector) polar bin; -inf marks empty bins."""
    r = np.hypot(xyz[:, 0], xyz[:, 1])
    keep = r < max_radius
    x = xyz[keep]
    rr = r[keep]
    out = np.full((num_rings, num_sectors), -np.inf)
    if x.shape[0] == 0:
        return out
    ring = np.floor(rr * (num_rings / max_radius)).astype(np.int64)
    np.minimum(ring, num_rings - 1, out=ring)
    az = np.arctan2(x[:, 1], x[:, 0])
    sector = np.floor((az + np.pi) * (num_sectors / (2.0 * np.pi))).astype(np.int64)
    sector %= num_sectors
    np.maximum.at(out, (ring, sector), x[:, 2])
    return out
