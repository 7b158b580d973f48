"""Odometry and map-based localization accuracy against ground-truth poses.

Odometry error is first-pose-aligned absolute trajectory error: both
trajectories are brought to a common start, then per-frame Euclidean
position differences are averaged. Localization registers each scan k+1
against the map, initialized from the ground-truth pose at k, and reports
planar and yaw RMSE of the result against ground truth at k+1. Both are
interpretations of under-specified protocols; report headers say so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import PointCloud, PoseSE3, Trajectory, compose_pose, invert_pose, wrap_angle
from .errors import NoCorrespondencesError, NoOverlapError
from .geometry import downsample
from .mapping import IcpParams, MapIndex, icp_register

ODOMETRY_METRIC_NOTE = (
    "translational error after aligning first shared poses; protocol is an interpretation"
)
LOCALIZATION_METRIC_NOTE = (
    "ICP pose at k+1 (initialized from ground truth at k) vs ground truth at k+1; "
    "protocol is an interpretation"
)


@dataclass(frozen=True)
class OdometryReport:
    frame_ids: list
    per_frame_errors: list
    average_error: float

    @property
    def frame_count(self) -> int:
        return len(self.per_frame_errors)


@dataclass(frozen=True)
class LocalizationFrame:
    frame_id: int
    xy_error: float
    yaw_error: float
    fitness: float


@dataclass(frozen=True)
class LocalizationReport:
    xy_rmse: float
    yaw_rmse: float
    per_frame: list
    skipped_frames: list


def odometry_error(estimated: Trajectory, ground_truth: Trajectory) -> OdometryReport:
    """First-pose-aligned average translational error over shared frames."""
    est = estimated.as_dict()
    gt = ground_truth.as_dict()
    shared = sorted(set(est) & set(gt))
    if not shared:
        raise NoOverlapError("trajectories share no frame ids")
    first = shared[0]
    align = compose_pose(gt[first], invert_pose(est[first]))
    errors = []
    for fid in shared:
        aligned = compose_pose(align, est[fid])
        errors.append(float(np.linalg.norm(aligned.translation - gt[fid].translation)))
    return OdometryReport(
        frame_ids=shared,
        per_frame_errors=errors,
        average_error=float(np.mean(errors)),
    )


def localization_error(
    map_cloud: PointCloud,
    scans,
    ground_truth: Trajectory,
    params: IcpParams = IcpParams(),
) -> LocalizationReport:
    """Scan-to-map localization RMSE over consecutive ground-truth pairs.

    For each scan at frame k+1 whose ground truth exists at both k and k+1,
    the scan is registered against the map starting from the pose at k.
    Frames with no correspondences are excluded from the RMSE and listed in
    skipped_frames.
    """
    if len(map_cloud) == 0:
        raise ValueError("empty map")
    index = MapIndex(map_cloud)
    gt = ground_truth.as_dict()
    per_frame = []
    skipped = []
    for scan in scans:
        k1 = scan.frame_id
        k0 = k1 - 1
        if k0 not in gt or k1 not in gt:
            continue
        source = downsample(scan, params.scan_voxel)
        try:
            result = icp_register(source, index, gt[k0], params)
        except NoCorrespondencesError:
            skipped.append(k1)
            continue
        est = result.pose
        truth = gt[k1]
        xy = float(np.linalg.norm(est.translation[:2] - truth.translation[:2]))
        yaw = abs(wrap_angle(est.yaw - truth.yaw))
        per_frame.append(LocalizationFrame(k1, xy, yaw, result.fitness))

    if per_frame:
        xy_rmse = float(np.sqrt(np.mean([f.xy_error**2 for f in per_frame])))
        yaw_rmse = float(np.sqrt(np.mean([f.yaw_error**2 for f in per_frame])))
    else:
        xy_rmse = float("nan")
        yaw_rmse = float("nan")
    return LocalizationReport(
        xy_rmse=xy_rmse, yaw_rmse=yaw_rmse, per_frame=per_frame, skipped_frames=skipped
    )


def write_odometry_report(report: OdometryReport, path) -> None:
    lines = [
        "# odometry report",
        f"# metric: {ODOMETRY_METRIC_NOTE}",
        "# frame error_m",
    ]
    for fid, err in zip(report.frame_ids, report.per_frame_errors):
        lines.append(f"{fid} {err:.9f}")
    lines.append("# summary: average_error_m frame_count")
    lines.append(f"{report.average_error:.9f} {report.frame_count}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_localization_report(report: LocalizationReport, path) -> None:
    lines = [
        "# localization report",
        f"# metric: {LOCALIZATION_METRIC_NOTE}",
        "# frame xy_error_m yaw_error_rad fitness",
    ]
    for f in report.per_frame:
        lines.append(f"{f.frame_id} {f.xy_error:.9f} {f.yaw_error:.9f} {f.fitness:.6f}")
    lines.append("# summary: xy_rmse_m yaw_rmse_rad evaluated skipped")
    lines.append(
        f"{report.xy_rmse:.9f} {report.yaw_rmse:.9f} "
        f"{len(report.per_frame)} {len(report.skipped_frames)}"
    )
    Path(path).write_text("\n".join(lines) + "\n")
