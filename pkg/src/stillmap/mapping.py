"""Scan-to-map registration and static-map accumulation with loop closure.

Registration is point-to-point ICP over a KD-tree: nearest-neighbor
correspondences within a gate, closed-form rigid alignment by SVD, repeat
until the pose delta is negligible. Accumulation anchors the first frame at
identity, predicts with constant velocity, merges the cleaned frame into the
world-frame map, and keeps the map at one centroid per map_voxel cell.
Cleaned frames are retained so the map can be rebuilt after a loop
correction redistributes drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import PointCloud, PoseSE3, Trajectory, compose_pose, invert_pose, transform_cloud
from .errors import NoCorrespondencesError, RegistrationFailedError
from .geometry import downsample
from .removal import FrameResult
from .scancontext import (
    ScanContext,
    ScanContextConfig,
    detect_loop,
    scan_context_descriptor,
    scan_context_distance,
    shift_to_yaw,
)


@dataclass(frozen=True)
class IcpParams:
    max_correspondence_dist: float = 1.0
    max_iterations: int = 50
    translation_eps: float = 1e-4
    rotation_eps: float = 1e-4
    map_voxel: float = 0.4
    scan_voxel: float = 0.2

    def __post_init__(self):
        vals = (
            self.max_correspondence_dist,
            self.max_iterations,
            self.translation_eps,
            self.rotation_eps,
            self.map_voxel,
            self.scan_voxel,
        )
        if any(v <= 0 for v in vals):
            raise ValueError("all ICP parameters must be positive")


@dataclass(frozen=True)
class IcpResult:
    pose: PoseSE3
    fitness: float
    inlier_rmse: float


class MapIndex:
    """A cloud plus its KD-tree, reusable across registrations."""

    def __init__(self, cloud: PointCloud):
        self.cloud = cloud
        self.tree = cKDTree(cloud.xyz) if len(cloud) else None


def _best_rigid(p: np.ndarray, q: np.ndarray) -> PoseSE3:
    """Closed-form least-squares transform aligning p onto q (SVD method)."""
    cp = p.mean(axis=0)
    cq = q.mean(axis=0)
    h = (p - cp).T @ (q - cq)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return PoseSE3(r, cq - r @ cp)


def _rotation_angle(r: np.ndarray) -> float:
    return float(np.arccos(np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)))


def icp_register(
    source, target, initial: PoseSE3, params: IcpParams = IcpParams()
) -> IcpResult:
    """Point-to-point ICP of `source` onto `target` starting at `initial`.

    `target` may be a PointCloud or a prebuilt MapIndex. Raises
    NoCorrespondencesError when the initial pose yields zero matches within
    max_correspondence_dist.
    """
    index = target if isinstance(target, MapIndex) else MapIndex(target)
    if index.tree is None:
        raise ValueError("empty registration target")
    src = source.xyz if isinstance(source, PointCloud) else np.asarray(source, dtype=np.float64)
    if src.shape[0] == 0:
        raise ValueError("empty registration source")
    target_xyz = index.cloud.xyz
    gate = params.max_correspondence_dist

    pose = initial
    for iteration in range(params.max_iterations):
        moved = pose.apply(src)
        dist, nn = index.tree.query(moved, distance_upper_bound=gate)
        matched = np.isfinite(dist)
        if not matched.any():
            if iteration == 0:
                raise NoCorrespondencesError("zero matches at the initial pose")
            break
        delta = _best_rigid(moved[matched], target_xyz[nn[matched]])
        pose = compose_pose(delta, pose)
        if (
            np.linalg.norm(delta.translation) < params.translation_eps
            and _rotation_angle(delta.rotation) < params.rotation_eps
        ):
            break

    dist, _ = index.tree.query(pose.apply(src), distance_upper_bound=gate)
    matched = np.isfinite(dist)
    fitness = float(matched.mean())
    rmse = float(np.sqrt(np.mean(dist[matched] ** 2))) if matched.any() else float("inf")
    return IcpResult(pose=pose, fitness=fitness, inlier_rmse=rmse)


@dataclass(frozen=True)
class MappingConfig:
    icp: IcpParams = IcpParams()
    scan_context: ScanContextConfig = ScanContextConfig()
    min_fitness: float = 0.3
    loop_closure: bool = True
    keep_frames: bool = True


@dataclass
class MapState:
    """Accumulated static map, pose history, and descriptor database.

    Mutated only by its owning accumulator; all contained values are
    immutable snapshots.
    """

    map_cloud: PointCloud = field(default_factory=lambda: PointCloud(np.zeros((0, 3))))
    poses: list = field(default_factory=list)  # [(frame_id, PoseSE3)]
    descriptor_db: list = field(default_factory=list)  # [(frame_id, ScanContext)]
    flagged_frames: list = field(default_factory=list)
    frames: dict = field(default_factory=dict)  # frame_id -> cleaned sensor-frame cloud
    map_index: MapIndex | None = None
    last_delta: PoseSE3 | None = None

    @property
    def trajectory(self) -> Trajectory:
        return Trajectory(self.poses)

    def pose_of(self, frame_id: int) -> PoseSE3:
        return dict(self.poses)[frame_id]


def _merge_into_map(state: MapState, world_cloud: PointCloud, map_voxel: float) -> None:
    if len(state.map_cloud) == 0:
        merged = world_cloud
    else:
        both_intensity = (
            state.map_cloud.intensity is not None and world_cloud.intensity is not None
        )
        xyz = np.vstack([state.map_cloud.xyz, world_cloud.xyz])
        inten = (
            np.concatenate([state.map_cloud.intensity, world_cloud.intensity])
            if both_intensity
            else None
        )
        merged = PointCloud(xyz, inten)
    state.map_cloud = downsample(merged, map_voxel)
    state.map_index = MapIndex(state.map_cloud)


def accumulate(
    state: MapState,
    frame: FrameResult,
    odometry_hint: PoseSE3 | None = None,
    config: MappingConfig = MappingConfig(),
) -> MapState:
    """Register a cleaned frame against the map and merge it in.

    The first frame anchors at identity. The initial guess is the previous
    pose composed with the last pose increment (constant velocity), or
    `odometry_hint` as an absolute pose when given. On a fitness below
    min_fitness the frame is flagged, the state is otherwise unchanged, and
    RegistrationFailedError is raised.
    """
    cleaned = frame.cleaned
    frame_id = cleaned.frame_id
    if state.poses and frame_id <= state.poses[-1][0]:
        raise ValueError("frames must arrive in increasing frame_id order")

    if not state.poses:
        pose = PoseSE3.identity()
    else:
        prev = state.poses[-1][1]
        if odometry_hint is not None:
            guess = odometry_hint
        elif state.last_delta is not None:
            guess = compose_pose(prev, state.last_delta)
        else:
            guess = prev
        scan = downsample(cleaned, config.icp.scan_voxel)
        try:
            result = icp_register(scan, state.map_index, guess, config.icp)
        except NoCorrespondencesError as e:
            state.flagged_frames.append(frame_id)
            raise RegistrationFailedError(str(e)) from e
        if result.fitness < config.min_fitness:
            state.flagged_frames.append(frame_id)
            raise RegistrationFailedError(
                f"fitness {result.fitness:.3f} below {config.min_fitness}"
            )
        pose = result.pose

    _merge_into_map(state, transform_cloud(cleaned, pose), config.icp.map_voxel)
    if state.poses:
        state.last_delta = compose_pose(invert_pose(state.poses[-1][1]), pose)
    state.poses.append((frame_id, pose))
    state.descriptor_db.append((frame_id, scan_context_descriptor(cleaned, config.scan_context)))
    if config.keep_frames:
        state.frames[frame_id] = cleaned
    return state


def _interpolated_correction(residual: PoseSE3, alpha: float) -> PoseSE3:
    """Fraction of a residual: translation and yaw scale linearly."""
    yaw = residual.yaw
    return PoseSE3.from_yaw(alpha * yaw, alpha * residual.translation)


def apply_loop_correction(
    state: MapState,
    loop: tuple[int, int],
    current_scan: PointCloud,
    config: MappingConfig = MappingConfig(),
) -> MapState:
    """Distribute the loop residual over the poses between the loop frames.

    `loop` is (current_frame, matched_frame), as accepted by detect_loop.
    The loop transform is refined by ICP between the stored scans,
    yaw-initialized from the descriptor shift. A failed refinement (fitness
    below min_fitness or no correspondences) raises RegistrationFailedError
    with the state untouched, discarding the loop.
    The map is rebuilt from the stored cleaned frames under corrected poses.
    """
    current_frame, matched_frame = loop
    if matched_frame not in state.frames:
        raise ValueError("loop correction requires retained frames (keep_frames)")
    descs = dict(state.descriptor_db)
    _, shift = scan_context_distance(descs[current_frame], descs[matched_frame])
    yaw0 = shift_to_yaw(shift, config.scan_context.num_sectors)

    matched_scan = downsample(state.frames[matched_frame], config.icp.scan_voxel)
    source = downsample(current_scan, config.icp.scan_voxel)
    try:
        result = icp_register(source, matched_scan, PoseSE3.from_yaw(yaw0), config.icp)
    except NoCorrespondencesError as e:
        raise RegistrationFailedError(str(e)) from e
    if result.fitness < config.min_fitness:
        raise RegistrationFailedError(
            f"loop fitness {result.fitness:.3f} below {config.min_fitness}"
        )

    pose_matched = state.pose_of(matched_frame)
    pose_current = state.pose_of(current_frame)
    desired = compose_pose(pose_matched, result.pose)
    residual = compose_pose(desired, invert_pose(pose_current))

    ids = [fid for fid, _ in state.poses]
    i0 = ids.index(matched_frame)
    i1 = ids.index(current_frame)
    span = i1 - i0
    corrected = list(state.poses)
    for i in range(i0, i1 + 1):
        alpha = (i - i0) / span if span else 1.0
        fid, pose = corrected[i]
        corrected[i] = (fid, compose_pose(_interpolated_correction(residual, alpha), pose))
    state.poses = corrected
    if len(state.poses) >= 2:
        state.last_delta = compose_pose(
            invert_pose(state.poses[-2][1]), state.poses[-1][1]
        )

    clouds = [transform_cloud(state.frames[fid], pose) for fid, pose in state.poses]
    xyz = np.vstack([c.xyz for c in clouds])
    inten = (
        np.concatenate([c.intensity for c in clouds])
        if all(c.intensity is not None for c in clouds)
        else None
    )
    state.map_cloud = downsample(PointCloud(xyz, inten), config.icp.map_voxel)
    state.map_index = MapIndex(state.map_cloud)
    return state


@dataclass
class LoopEvent:
    current_frame: int
    matched_frame: int
    distance: float
    accepted: bool
    residual_translation: float = 0.0
    residual_yaw: float = 0.0


class MapBuilder:
    """Sequential orchestration of accumulate + loop detection/correction."""

    def __init__(self, config: MappingConfig = MappingConfig()):
        self.config = config
        self.state = MapState()
        self.loop_events: list[LoopEvent] = []

    def add_frame(self, frame: FrameResult, odometry_hint: PoseSE3 | None = None) -> None:
        accumulate(self.state, frame, odometry_hint, self.config)
        if not self.config.loop_closure:
            return
        frame_id = frame.cleaned.frame_id
        hit = detect_loop(
            self.state.descriptor_db[:-1], self.state.descriptor_db[-1][1],
            frame_id, self.config.scan_context,
        )
        if hit is None:
            return
        matched, dist = hit
        before = self.state.pose_of(frame_id)
        try:
            apply_loop_correction(self.state, (frame_id, matched), frame.cleaned, self.config)
        except RegistrationFailedError:
            self.loop_events.append(
                LoopEvent(frame_id, matched, dist, accepted=False)
            )
            return
        residual = compose_pose(self.state.pose_of(frame_id), invert_pose(before))
        self.loop_events.append(
            LoopEvent(
                current_frame=frame_id,
                matched_frame=matched,
                distance=dist,
                accepted=True,
                residual_translation=float(np.linalg.norm(residual.translation)),
                residual_yaw=abs(residual.yaw),
            )
        )
