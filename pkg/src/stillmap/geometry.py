"""Voxel-space preprocessing and oriented-bounding-box math.

Range and voxel membership use closed intervals on both ends; points exactly
on the upper bound clamp into the last cell so the grid stays a partition.
Box extents follow the (w, l, h) -> (x, y, z) assignment: w is the box-frame
x extent, l the y extent, h the z extent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import Point3, PointCloud, wrap_angle
from .errors import OutOfRangeError


def _vec3(v, name: str) -> np.ndarray:
    a = np.array(v, dtype=np.float64, copy=True).reshape(3)
    if not np.isfinite(a).all():
        raise ValueError(f"non-finite {name}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RangeSpec:
    """Axis-aligned crop bounds, closed on both ends."""

    min_bound: np.ndarray
    max_bound: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min_bound", _vec3(self.min_bound, "min_bound"))
        object.__setattr__(self, "max_bound", _vec3(self.max_bound, "max_bound"))
        if not (self.min_bound < self.max_bound).all():
            raise ValueError("min_bound must be < max_bound component-wise")

    def contains(self, xyz: np.ndarray) -> np.ndarray:
        xyz = np.atleast_2d(xyz)
        return np.logical_and(xyz >= self.min_bound, xyz <= self.max_bound).all(axis=1)


@dataclass(frozen=True)
class VoxelGridSpec:
    """Regular grid over a RangeSpec; voxel_size may be scalar or per-axis."""

    bounds: RangeSpec
    voxel_size: np.ndarray

    def __post_init__(self):
        size = np.broadcast_to(np.asarray(self.voxel_size, dtype=np.float64), (3,)).copy()
        if not (np.isfinite(size).all() and (size > 0).all()):
            raise ValueError("voxel_size must be positive")
        size.setflags(write=False)
        object.__setattr__(self, "voxel_size", size)

    @property
    def dims(self) -> np.ndarray:
        extent = self.bounds.max_bound - self.bounds.min_bound
        return np.maximum(np.ceil(extent / self.voxel_size), 1).astype(np.int64)


@dataclass(frozen=True)
class OrientedBox:
    """Yaw-oriented 3D box: center, (w, l, h) extents, rotation about z."""

    center: np.ndarray
    size: np.ndarray
    yaw: float
    class_label: str = ""
    score: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        object.__setattr__(self, "size", _vec3(self.size, "size"))
        if not (self.size > 0).all():
            raise ValueError("box size must be strictly positive")
        if not math.isfinite(self.yaw):
            raise ValueError("non-finite yaw")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must be in [0, 1]")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def half_extents(self) -> np.ndarray:
        return self.size / 2.0

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def range_filter(cloud: PointCloud, bounds: RangeSpec):
    """Keep points with min_bound <= p <= max_bound (closed interval).

    Returns the filtered cloud (order preserved) and the kept original indices.
    """
    kept = np.flatnonzero(bounds.contains(cloud.xyz))
    return cloud.select(kept), kept


def voxel_index(point, grid: VoxelGridSpec):
    """(i, j, k) of the voxel containing `point`.

    Points exactly on the upper bound clamp into the last cell; anything
    outside the grid range raises OutOfRangeError.
    """
    p = point.as_array() if isinstance(point, Point3) else np.asarray(point, dtype=np.float64)
    b = grid.bounds
    if not ((p >= b.min_bound).all() and (p <= b.max_bound).all()):
        raise OutOfRangeError(f"point {p.tolist()} outside grid range")
    idx = np.floor((p - b.min_bound) / grid.voxel_size).astype(np.int64)
    idx = np.minimum(idx, grid.dims - 1)
    return int(idx[0]), int(idx[1]), int(idx[2])


def voxel_downsample(cloud: PointCloud, grid: VoxelGridSpec) -> PointCloud:
    """One centroid per occupied voxel, in lexicographic (i, j, k) order.

    Points outside the grid range are dropped.
    """
    cent, inten, _ = kernels.voxel_centroids(
        cloud.xyz,
        cloud.intensity,
        grid.bounds.min_bound,
        grid.bounds.max_bound,
        grid.voxel_size,
        grid.dims,
    )
    return PointCloud(cent, inten, cloud.frame_id)


def downsample(cloud: PointCloud, voxel_size: float) -> PointCloud:
    """Voxel-downsample with cell boundaries anchored at multiples of the size.

    The grid origin is derived from the data but snapped to the global lattice,
    so repeated calls over growing clouds keep identical cell boundaries.
    """
    if len(cloud) == 0:
        return cloud
    size = float(voxel_size)
    lo = np.floor(cloud.xyz.min(axis=0) / size) * size
    hi = (np.floor(cloud.xyz.max(axis=0) / size) + 1) * size
    grid = VoxelGridSpec(RangeSpec(lo, hi), size)
    return voxel_downsample(cloud, grid)


_CORNER_SIGNS = np.array(
    [
        [-1, -1, -1],
        [-1, -1, 1],
        [-1, 1, -1],
        [-1, 1, 1],
        [1, -1, -1],
        [1, -1, 1],
        [1, 1, -1],
        [1, 1, 1],
    ],
    dtype=np.float64,
)


def obb_vertices(box: OrientedBox) -> np.ndarray:
    """The 8 corners, center + R(yaw) @ (+-w/2, +-l/2, +-h/2).

    Rows follow the fixed sign order (---, --+, -+-, -++, +--, +-+, ++-, +++).
    """
    offsets = _CORNER_SIGNS * box.half_extents
    return offsets @ box.rotation().T + box.center


def point_in_obb(point, box: OrientedBox, margin: float = 0.0) -> bool:
    """Closed containment test: |R(yaw)^T (p - c)| <= half + margin per axis."""
    p = point.as_array() if isinstance(point, Point3) else np.asarray(point, dtype=np.float64)
    local = box.rotation().T @ (p - box.center)
    return bool((np.abs(local) <= box.half_extents + margin).all())


def points_in_obb(xyz, box: OrientedBox, margin: float = 0.0) -> np.ndarray:
    """Vectorized point_in_obb over an (N, 3) array or cloud."""
    if isinstance(xyz, PointCloud):
        xyz = xyz.xyz
    return kernels.obb_mask(
        np.ascontiguousarray(xyz, dtype=np.float64),
        box.center,
        box.yaw,
        box.half_extents,
        float(margin),
    )


def points_in_any_obb(xyz, boxes, margin: float = 0.0) -> np.ndarray:
    """Mask of points contained in at least one box."""
    if isinstance(xyz, PointCloud):
        xyz = xyz.xyz
    xyz = np.ascontiguousarray(xyz, dtype=np.float64)
    if not boxes:
        return np.zeros(xyz.shape[0], dtype=bool)
    centers = np.ascontiguousarray([b.center for b in boxes], dtype=np.float64)
    yaws = np.ascontiguousarray([b.yaw for b in boxes], dtype=np.float64)
    halves = np.ascontiguousarray([b.half_extents for b in boxes], dtype=np.float64)
    return kernels.any_obb_mask(xyz, centers, yaws, halves, float(margin))
