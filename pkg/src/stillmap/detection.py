"""Per-frame dynamic-object boxes: from detection files, or from a
self-contained Euclidean-clustering fallback when no detector output exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import PointCloud, wrap_angle
from .geometry import OrientedBox
from .ground import GroundModel

DEFAULT_DYNAMIC_LABELS = frozenset({"car", "pedestrian", "cyclist", "truck", "van"})


@dataclass(frozen=True)
class DynamicClassSet:
    """Class labels treated as dynamic; matching is case-insensitive."""

    labels: frozenset = DEFAULT_DYNAMIC_LABELS
    min_score: float = 0.5

    def __post_init__(self):
        labels = frozenset(str(l).lower() for l in self.labels)
        if not labels:
            raise ValueError("dynamic class set must be nonempty")
        if not 0.0 <= self.min_score <= 1.0:
            raise ValueError("min_score must be in [0, 1]")
        object.__setattr__(self, "labels", labels)

    def matches(self, class_label: str, score: float) -> bool:
        return class_label.lower() in self.labels and score >= self.min_score


def boxes_for_frame(detections, frame_id: int, classes: DynamicClassSet) -> list[OrientedBox]:
    """Detection records of the frame passing the class/score gate, file order."""
    out = []
    for rec in detections.get(frame_id, []):
        if classes.matches(rec.class_label, rec.score):
            out.append(
                OrientedBox(
                    center=np.asarray(rec.center),
                    size=np.asarray(rec.size),
                    yaw=rec.yaw,
                    class_label=rec.class_label,
                    score=rec.score,
                )
            )
    return out


@dataclass(frozen=True)
class ClusterParams:
    cluster_radius: float = 0.5
    min_cluster_points: int = 30
    min_footprint: float = 0.3
    max_footprint: float = 20.0
    min_height: float = 0.5
    max_height: float = 3.0


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n)

    def find(self, i: int) -> int:
        p = self.parent
        root = i
        while p[root] != root:
            root = p[root]
        while p[i] != root:
            p[i], i = root, p[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _principal_yaw(xy: np.ndarray) -> float:
    """Yaw of the dominant xy-covariance eigenvector, sign-normalized."""
    d = xy - xy.mean(axis=0)
    cov = d.T @ d
    _, vecs = np.linalg.eigh(cov)
    v = vecs[:, -1]
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return math.atan2(v[1], v[0])


def _fit_cluster_box(pts: np.ndarray) -> OrientedBox:
    yaw = _principal_yaw(pts[:, :2])
    c, s = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    anchor = pts.mean(axis=0)
    local = (pts - anchor) @ rot
    lo = local.min(axis=0)
    hi = local.max(axis=0)
    center = anchor + rot @ ((lo + hi) / 2.0)
    size = np.maximum(hi - lo, 1e-6)
    return OrientedBox(center=center, size=size, yaw=yaw, class_label="cluster", score=1.0)


def cluster_detect(
    cloud: PointCloud, ground: GroundModel, params: ClusterParams = ClusterParams()
) -> list[OrientedBox]:
    """Euclidean-cluster the non-ground points and box up vehicle-scale blobs.

    Clusters are the connected components of the radius graph at
    params.cluster_radius; each surviving cluster gets a yaw-aligned box with
    yaw from the xy-covariance principal axis and extents from the rotated
    min/max. Deterministic: clusters are emitted by smallest member index.
    """
    ng = ground.nonground_indices
    if ng.size == 0:
        return []
    pts = cloud.xyz[ng]
    uf = _UnionFind(pts.shape[0])
    pairs = cKDTree(pts).query_pairs(params.cluster_radius, output_type="ndarray")
    for a, b in pairs:
        uf.union(int(a), int(b))
    roots = np.array([uf.find(i) for i in range(pts.shape[0])])

    boxes = []
    for root in np.unique(roots):
        members = pts[roots == root]
        if members.shape[0] < params.min_cluster_points:
            continue
        box = _fit_cluster_box(members)
        w, l, h = box.size
        footprint = w * l
        if not params.min_footprint <= footprint <= params.max_footprint:
            continue
        if not params.min_height <= h <= params.max_height:
            continue
        boxes.append(box)
    return boxes
