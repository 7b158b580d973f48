"""Ground/non-ground partition and the mean ground height used for projection.

The fit is deterministic: seeds come from the lowest z values, then a fixed
number of least-squares plane refinements re-select inliers by distance.
No randomized sampling, so identical clouds always yield identical models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PointCloud
from .errors import DegenerateGroundError, EmptyGroundError

_MIN_NORMAL_Z = 0.7


@dataclass(frozen=True)
class GroundParams:
    seed_fraction: float = 0.1
    seed_margin: float = 0.4
    dist_threshold: float = 0.2
    iterations: int = 3
    min_seed_points: int = 50


@dataclass(frozen=True)
class GroundModel:
    """Partition of one frame plus the fitted plane.

    The plane satisfies normal . p + offset ~= 0 with a unit, upward normal.
    ground_indices and nonground_indices partition the frame's index range.
    """

    ground_indices: np.ndarray
    nonground_indices: np.ndarray
    mean_z: float
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("plane normal must be unit length")
        if n[2] <= _MIN_NORMAL_Z:
            raise ValueError("plane normal is not near-vertical")
        object.__setattr__(self, "ground_indices", np.asarray(self.ground_indices, dtype=np.int64))
        object.__setattr__(
            self, "nonground_indices", np.asarray(self.nonground_indices, dtype=np.int64)
        )
        object.__setattr__(self, "normal", n)


def _fit_plane(pts: np.ndarray):
    """Least-squares plane through pts: unit normal (z >= 0) and offset."""
    centroid = pts.mean(axis=0)
    d = pts - centroid
    cov = d.T @ d
    _, vecs = np.linalg.eigh(cov)
    normal = vecs[:, 0]
    if normal[2] < 0:
        normal = -normal
    norm = np.linalg.norm(normal)
    if norm == 0:
        raise DegenerateGroundError("degenerate plane fit")
    normal = normal / norm
    return normal, float(-normal @ centroid)


def segment_ground(cloud: PointCloud, params: GroundParams = GroundParams()) -> GroundModel:
    """Seeded iterative plane fit; raises DegenerateGroundError when the
    flat-ground assumption fails (tilted normal or too few inliers)."""
    n = len(cloud)
    if n < params.min_seed_points:
        raise DegenerateGroundError(f"only {n} points, need {params.min_seed_points}")
    xyz = cloud.xyz
    z = xyz[:, 2]

    k = max(1, int(np.ceil(n * params.seed_fraction)))
    lowest_mean = float(np.partition(z, k - 1)[:k].mean())
    inliers = z <= lowest_mean + params.seed_margin

    normal = np.array([0.0, 0.0, 1.0])
    offset = 0.0
    for _ in range(params.iterations):
        pts = xyz[inliers]
        if pts.shape[0] < 3:
            raise DegenerateGroundError("fewer than 3 seed points")
        normal, offset = _fit_plane(pts)
        dist = np.abs(xyz @ normal + offset)
        inliers = dist <= params.dist_threshold

    count = int(inliers.sum())
    if count < params.min_seed_points:
        raise DegenerateGroundError(f"{count} ground inliers, need {params.min_seed_points}")
    if normal[2] <= _MIN_NORMAL_Z:
        raise DegenerateGroundError(f"ground normal z-component {normal[2]:.3f} <= {_MIN_NORMAL_Z}")

    ground_idx = np.flatnonzero(inliers)
    return GroundModel(
        ground_indices=ground_idx,
        nonground_indices=np.flatnonzero(~inliers),
        mean_z=float(z[inliers].mean()),
        normal=normal,
        offset=offset,
    )


def ground_mean_z(cloud: PointCloud, ground_indices) -> float:
    """Arithmetic mean of z over the index set."""
    idx = np.asarray(ground_indices, dtype=np.int64)
    if idx.size == 0:
        raise EmptyGroundError("empty ground index set")
    return float(cloud.xyz[idx, 2].mean())
