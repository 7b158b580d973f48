"""Per-frame cleaning stage: label points inside dynamic boxes and flatten
them onto the ground plane, preserving point count and order.

Only box-labeled points move, and only in z; everything else passes through
bitwise. Projected points keep their intensity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PointCloud
from .detection import ClusterParams, DynamicClassSet, boxes_for_frame, cluster_detect
from .errors import DegenerateGroundError
from .geometry import OrientedBox, RangeSpec, points_in_any_obb, range_filter
from .ground import GroundModel, GroundParams, segment_ground

DEFAULT_BOUNDS = RangeSpec((-80.0, -80.0, -5.0), (80.0, 80.0, 25.0))


@dataclass(frozen=True)
class RemovalConfig:
    """Everything the cleaning stage needs for one frame."""

    bounds: RangeSpec = DEFAULT_BOUNDS
    margin: float = 0.1
    classes: DynamicClassSet = DynamicClassSet()
    ground: GroundParams = GroundParams()
    cluster: ClusterParams = ClusterParams()
    fallback: bool = False
    degenerate_policy: str = "skip"  # "skip" emits the frame unmodified; "abort" raises
    enabled: bool = True

    def __post_init__(self):
        if self.degenerate_policy not in ("skip", "abort"):
            raise ValueError(f"unknown degenerate policy {self.degenerate_policy!r}")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")


@dataclass(frozen=True)
class FrameResult:
    """Output of the cleaning stage, indexed against the range-filtered cloud."""

    cleaned: PointCloud
    dynamic_indices: np.ndarray
    ground: GroundModel | None
    boxes: list[OrientedBox]
    kept_indices: np.ndarray
    degenerate: bool = False


def label_dynamic_points(cloud: PointCloud, boxes, margin: float) -> np.ndarray:
    """Sorted indices of points inside at least one box (set semantics)."""
    return np.flatnonzero(points_in_any_obb(cloud, list(boxes), margin))


def project_dynamic(cloud: PointCloud, dynamic_indices, mean_z: float) -> PointCloud:
    """Replace z with mean_z at the given indices; x, y, intensity untouched."""
    idx = np.asarray(dynamic_indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= len(cloud)):
        raise IndexError("dynamic index outside cloud")
    xyz = cloud.xyz.copy()
    xyz[idx, 2] = mean_z
    return cloud.with_xyz(xyz)


def process_frame(
    cloud: PointCloud, detections=None, config: RemovalConfig = RemovalConfig()
) -> FrameResult:
    """Range filter, ground fit, box acquisition, label, project.

    `detections` is a frame-indexed detection map or None. A frame with file
    detections uses those; otherwise the clustering fallback runs when
    enabled; otherwise no boxes. Degenerate ground follows the configured
    policy: "skip" emits the filtered cloud unmodified and flags the frame.
    """
    filtered, kept = range_filter(cloud, config.bounds)
    empty = np.zeros(0, dtype=np.int64)
    if not config.enabled:
        return FrameResult(filtered, empty, None, [], kept)

    try:
        ground = segment_ground(filtered, config.ground)
    except DegenerateGroundError:
        if config.degenerate_policy == "abort":
            raise
        return FrameResult(filtered, empty, None, [], kept, degenerate=True)

    if detections is not None and detections.get(cloud.frame_id):
        boxes = boxes_for_frame(detections, cloud.frame_id, config.classes)
    elif config.fallback:
        boxes = cluster_detect(filtered, ground, config.cluster)
    else:
        boxes = []

    dynamic = label_dynamic_points(filtered, boxes, config.margin)
    cleaned = project_dynamic(filtered, dynamic, ground.mean_z)
    return FrameResult(cleaned, dynamic, ground, boxes, kept)
