"""Shared value types: points, clouds, rigid poses, trajectories.

Clouds are array-backed (float64 in memory regardless of on-disk precision)
and index-stable: every operation that relabels or projects points keeps
point i at position i. All types are immutable after construction and safe
to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

_ORTHO_TOL = 1e-9


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.remainder(a, math.tau)
    return math.pi if r <= -math.pi else r


@dataclass(frozen=True)
class Point3:
    """A single point in meters; intensity is carried through, never consumed."""

    x: float
    y: float
    z: float
    intensity: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y}, {self.z})")
        if self.intensity is not None and not math.isfinite(self.intensity):
            raise ValueError("non-finite intensity")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class PointCloud:
    """Ordered point set for one scan (or an accumulated map).

    `xyz` is an (N, 3) float64 array, `intensity` an optional (N,) array,
    `frame_id` the nonnegative sequence index of the scan.
    """

    __slots__ = ("xyz", "intensity", "frame_id")

    def __init__(self, xyz, intensity=None, frame_id: int = 0):
        xyz = np.array(xyz, dtype=np.float64, copy=True).reshape(-1, 3)
        if not np.isfinite(xyz).all():
            raise ValueError("non-finite coordinates in cloud")
        if frame_id < 0:
            raise ValueError("frame_id must be nonnegative")
        if intensity is not None:
            intensity = np.array(intensity, dtype=np.float64, copy=True).reshape(-1)
            if intensity.shape[0] != xyz.shape[0]:
                raise ValueError("intensity length does not match point count")
            if not np.isfinite(intensity).all():
                raise ValueError("non-finite intensity in cloud")
            intensity = _readonly(intensity)
        self.xyz = _readonly(np.ascontiguousarray(xyz))
        self.intensity = intensity
        self.frame_id = int(frame_id)

    @classmethod
    def from_points(cls, points: Iterable[Point3], frame_id: int = 0) -> "PointCloud":
        pts = list(points)
        xyz = np.array([[p.x, p.y, p.z] for p in pts], dtype=np.float64).reshape(-1, 3)
        has_intensity = any(p.intensity is not None for p in pts)
        inten = (
            np.array([0.0 if p.intensity is None else p.intensity for p in pts])
            if has_intensity
            else None
        )
        return cls(xyz, inten, frame_id)

    def with_xyz(self, xyz: np.ndarray) -> "PointCloud":
        """Same intensity and frame id, new coordinates (count must match)."""
        if len(xyz) != len(self.xyz):
            raise ValueError("point count changed")
        return PointCloud(xyz, self.intensity, self.frame_id)

    def select(self, indices: np.ndarray) -> "PointCloud":
        """Subset cloud preserving input order of `indices`."""
        inten = None if self.intensity is None else self.intensity[indices]
        return PointCloud(self.xyz[indices], inten, self.frame_id)

    def __len__(self) -> int:
        return self.xyz.shape[0]

    def __getitem__(self, i: int) -> Point3:
        x, y, z = self.xyz[i]
        inten = None if self.intensity is None else float(self.intensity[i])
        return Point3(float(x), float(y), float(z), inten)

    def __iter__(self) -> Iterator[Point3]:
        for i in range(len(self)):
            yield self[i]

    def __repr__(self) -> str:
        return f"PointCloud(n={len(self)}, frame_id={self.frame_id})"


def orthonormalize(rotation: np.ndarray) -> np.ndarray:
    """Nearest proper-orthogonal matrix (Frobenius sense) via SVD."""
    u, _, vt = np.linalg.svd(rotation)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


def _rotation_drift(rotation: np.ndarray) -> float:
    return float(
        max(
            np.abs(rotation.T @ rotation - np.eye(3)).max(),
            abs(np.linalg.det(rotation) - 1.0),
        )
    )


@dataclass(frozen=True)
class PoseSE3:
    """Rigid transform: p_world = rotation @ p_local + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64, copy=True).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64, copy=True).reshape(3)
        if not (np.isfinite(r).all() and np.isfinite(t).all()):
            raise ValueError("non-finite pose")
        if _rotation_drift(r) > _ORTHO_TOL:
            raise ValueError("rotation is not orthonormal with determinant +1")
        object.__setattr__(self, "rotation", _readonly(r))
        object.__setattr__(self, "translation", _readonly(t))

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> "PoseSE3":
        c, s = math.cos(yaw), math.sin(yaw)
        r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls(r, np.asarray(translation, dtype=np.float64))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "PoseSE3":
        m = np.asarray(m, dtype=np.float64)
        r = m[:3, :3]
        if _rotation_drift(r) > _ORTHO_TOL:
            r = orthonormalize(r)
        return cls(r, m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @property
    def yaw(self) -> float:
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])

    def apply(self, xyz: np.ndarray) -> np.ndarray:
        xyz = np.asarray(xyz, dtype=np.float64)
        return xyz @ self.rotation.T + self.translation


def compose_pose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    """a after b: (a o b).apply(p) == a.apply(b.apply(p))."""
    r = a.rotation @ b.rotation
    if _rotation_drift(r) > _ORTHO_TOL:
        r = orthonormalize(r)
    return PoseSE3(r, a.rotation @ b.translation + a.translation)


def invert_pose(p: PoseSE3) -> PoseSE3:
    rt = p.rotation.T
    return PoseSE3(rt, -(rt @ p.translation))


def transform_cloud(cloud: PointCloud, pose: PoseSE3) -> PointCloud:
    """Map every point p -> R p + t; order, count, and intensity preserved."""
    return cloud.with_xyz(pose.apply(cloud.xyz))


class Trajectory:
    """Ordered (frame_id, PoseSE3) sequence with strictly increasing ids."""

    __slots__ = ("entries",)

    def __init__(self, entries: Sequence[tuple[int, PoseSE3]]):
        entries = tuple((int(f), p) for f, p in entries)
        ids = [f for f, _ in entries]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValueError("frame_ids must be strictly increasing")
        self.entries = entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> tuple[int, PoseSE3]:
        return self.entries[i]

    @property
    def frame_ids(self) -> list[int]:
        return [f for f, _ in self.entries]

    def pose_of(self, frame_id: int) -> PoseSE3:
        for f, p in self.entries:
            if f == frame_id:
                return p
        raise KeyError(frame_id)

    def as_dict(self) -> dict[int, PoseSE3]:
        return dict(self.entries)

    def positions(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 3))
        return np.stack([p.translation for _, p in self.entries])

    def __repr__(self) -> str:
        return f"Trajectory(n={len(self)})"
