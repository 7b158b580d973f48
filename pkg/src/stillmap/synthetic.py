"""Deterministic synthetic scenes with exact ground truth.

Surfaces are sampled directly (no occlusion or ray casting): a noisy ground
rectangle, axis-aligned static cuboids, and yaw-oriented dynamic boxes whose
presence can differ between two passes over the same path. Every sampler is
seeded per (component, pass): repeated calls are bitwise identical, while
the second pass re-samples every surface the way a re-scan would, so
cross-pass registration has realistic residuals instead of exact twins.

Scans are rendered in the sensor frame of each path pose; path poses are
expected to be yaw-only so emitted detections carry a well-defined yaw.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import PointCloud, PoseSE3, Trajectory, invert_pose, wrap_angle
from .fileio import (
    DetectionRecord,
    write_detections,
    write_poses,
    write_scan_binary,
)
from .geometry import OrientedBox

PRESENCE_VALUES = ("first", "second", "both")

# keep sampled surface points strictly inside their generating box
_SURFACE_INSET = 1.0 - 1e-9


@dataclass(frozen=True)
class StaticBox:
    """Axis-aligned cuboid (building, wall)."""

    center: tuple
    size: tuple


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    ground_z: float = -1.7
    ground_extent: float = 60.0
    ground_noise_sigma: float = 0.02
    static_structures: tuple = ()
    dynamic_objects: tuple = ()  # ((OrientedBox, presence), ...)
    sensor_path: tuple = (PoseSE3.identity(),)
    points_per_surface: float = 3.0

    def __post_init__(self):
        for _, presence in self.dynamic_objects:
            if presence not in PRESENCE_VALUES:
                raise ValueError(f"presence must be one of {PRESENCE_VALUES}")


@dataclass
class SyntheticPass:
    scans: list
    gt_poses: Trajectory
    gt_dynamic_labels: list
    detections: dict
    world_xyz: np.ndarray


def _sample_rect(rng, extent: float, z: float, sigma: float, density: float) -> np.ndarray:
    n = max(1, round(density * extent * extent))
    xy = rng.uniform(-extent / 2.0, extent / 2.0, size=(n, 2))
    zz = z + (sigma * rng.standard_normal(n) if sigma > 0 else np.zeros(n))
    return np.column_stack([xy, zz])


def _sample_cuboid_surface(rng, center, size, yaw: float, density: float) -> np.ndarray:
    """Uniform samples over all six faces, nudged strictly inside."""
    half = np.asarray(size, dtype=np.float64) / 2.0
    areas = np.array(
        [
            size[1] * size[2],  # +-x faces
            size[0] * size[2],  # +-y faces
            size[0] * size[1],  # +-z faces
        ]
    )
    locals_ = []
    for axis in range(3):
        n_face = max(1, round(density * areas[axis]))
        for sign in (-1.0, 1.0):
            pts = rng.uniform(-half, half, size=(n_face, 3))
            pts[:, axis] = sign * half[axis]
            locals_.append(pts)
    local = np.vstack(locals_) * _SURFACE_INSET
    c, s = np.cos(yaw), np.sin(yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return local @ rot.T + np.asarray(center, dtype=np.float64)


def _present(presence: str, which: str) -> bool:
    return presence == "both" or presence == which


def generate_pass(spec: SceneSpec, which: str = "first") -> SyntheticPass:
    """Render all scans of one pass with exact labels and perfect detections."""
    if which not in ("first", "second"):
        raise ValueError("pass must be 'first' or 'second'")
    pass_key = 0 if which == "first" else 1

    ground = _sample_rect(
        np.random.default_rng([spec.seed, pass_key, 0]),
        spec.ground_extent,
        spec.ground_z,
        spec.ground_noise_sigma,
        spec.points_per_surface,
    )
    chunks = [ground]
    for i, box in enumerate(spec.static_structures):
        chunks.append(
            _sample_cuboid_surface(
                np.random.default_rng([spec.seed, pass_key, 1, i]),
                box.center,
                box.size,
                0.0,
                spec.points_per_surface,
            )
        )
    static_count = sum(len(c) for c in chunks)

    present_boxes = []
    dynamic_ranges = []
    offset = static_count
    for j, (box, presence) in enumerate(spec.dynamic_objects):
        if not _present(presence, which):
            continue
        pts = _sample_cuboid_surface(
            np.random.default_rng([spec.seed, pass_key, 2, j]),
            box.center,
            box.size,
            box.yaw,
            spec.points_per_surface,
        )
        chunks.append(pts)
        present_boxes.append(box)
        dynamic_ranges.append(np.arange(offset, offset + len(pts)))
        offset += len(pts)

    world = np.vstack(chunks)
    labels = (
        np.concatenate(dynamic_ranges) if dynamic_ranges else np.zeros(0, dtype=np.int64)
    )

    scans = []
    detections: dict[int, list[DetectionRecord]] = {}
    gt_entries = []
    for fid, pose in enumerate(spec.sensor_path):
        inv = invert_pose(pose)
        scans.append(PointCloud(inv.apply(world), frame_id=fid))
        gt_entries.append((fid, pose))
        recs = []
        for box in present_boxes:
            center_s = inv.apply(box.center)
            recs.append(
                DetectionRecord(
                    frame_id=fid,
                    class_label=box.class_label or "car",
                    score=1.0,
                    center=tuple(float(v) for v in center_s),
                    size=tuple(float(v) for v in box.size),
                    yaw=wrap_angle(box.yaw - pose.yaw),
                )
            )
        if recs:
            detections[fid] = recs

    return SyntheticPass(
        scans=scans,
        gt_poses=Trajectory(gt_entries),
        gt_dynamic_labels=[labels] * len(scans),
        detections=detections,
        world_xyz=world,
    )


def write_pass(data: SyntheticPass, out_dir) -> None:
    """Write a pass in the dataset conventions the CLI consumes."""
    out = Path(out_dir)
    scans_dir = out / "scans"
    scans_dir.mkdir(parents=True, exist_ok=True)
    for scan in data.scans:
        write_scan_binary(scan, scans_dir / f"{scan.frame_id:06d}.bin")
    write_poses(data.gt_poses, out / "poses.txt")
    all_recs = [rec for fid in sorted(data.detections) for rec in data.detections[fid]]
    write_detections(all_recs, out / "detections.jsonl")
    lines = [
        f"{scan.frame_id} {len(labels)}"
        for scan, labels in zip(data.scans, data.gt_dynamic_labels)
    ]
    (out / "labels.txt").write_text("\n".join(lines) + "\n")


def straight_path(n: int, step: float = 1.0) -> tuple:
    """n poses marching along +x."""
    return tuple(PoseSE3.from_yaw(0.0, (i * step, 0.0, 0.0)) for i in range(n))


def circle_path(radius: float, frames: int, revisit: int = 0) -> tuple:
    """Counterclockwise circle with tangent heading, starting at (radius, 0).

    Unlike square_path there are no instantaneous turns, so constant-velocity
    prediction stays valid at every frame.
    """
    poses = []
    for i in range(frames):
        a = 2.0 * np.pi * i / frames
        poses.append(
            PoseSE3.from_yaw(
                wrap_angle(a + np.pi / 2.0),
                (radius * np.cos(a), radius * np.sin(a), 0.0),
            )
        )
    for i in range(revisit):
        poses.append(poses[i % frames])
    return tuple(poses)


def square_path(side: float, step: float, revisit: int = 0) -> tuple:
    """Counterclockwise square loop starting at the origin, heading +x.

    `revisit` appends that many poses repeating the start of the loop.
    """
    per_side = max(1, int(round(side / step)))
    poses = []
    corners = [
        ((1.0, 0.0), 0.0),
        ((0.0, 1.0), np.pi / 2),
        ((-1.0, 0.0), np.pi),
        ((0.0, -1.0), -np.pi / 2),
    ]
    pos = np.zeros(2)
    for (dx, dy), yaw in corners:
        for _ in range(per_side):
            poses.append(PoseSE3.from_yaw(yaw, (pos[0], pos[1], 0.0)))
            pos = pos + np.array([dx, dy]) * step
    for i in range(revisit):
        base = poses[i % len(poses)]
        poses.append(base)
    return tuple(poses)


def parked_car(x: float, y: float, yaw: float, ground_z: float, clearance: float = 0.25):
    """A car-sized box floating `clearance` above the ground plane."""
    size = (1.8, 4.5, 1.5)
    return OrientedBox(
        center=(x, y, ground_z + clearance + size[2] / 2.0),
        size=size,
        yaw=yaw,
        class_label="car",
        score=1.0,
    )


def demo_scene(seed: int = 0, frames: int = 20) -> SceneSpec:
    """A small street block: buildings, walls, and a row of parked cars that
    move between passes."""
    gz = -1.7
    statics = (
        StaticBox(center=(18.0, 9.0, gz + 4.0), size=(10.0, 6.0, 8.0)),
        StaticBox(center=(-12.0, -14.0, gz + 2.5), size=(16.0, 1.0, 5.0)),
        StaticBox(center=(-16.0, 12.0, gz + 3.0), size=(5.0, 7.0, 6.0)),
        StaticBox(center=(8.0, -16.0, gz + 2.0), size=(6.0, 4.0, 4.0)),
        StaticBox(center=(26.0, -6.0, gz + 1.5), size=(2.0, 12.0, 3.0)),
    )
    dynamics = (
        (parked_car(6.0, 4.0, 0.2, gz), "first"),
        (parked_car(10.0, -5.0, 1.4, gz), "first"),
        (parked_car(14.0, 5.0, -0.4, gz), "both"),
        (parked_car(7.0, 5.5, 0.9, gz), "second"),
        (parked_car(11.5, -3.0, -1.2, gz), "second"),
    )
    return SceneSpec(
        seed=seed,
        ground_z=gz,
        ground_extent=60.0,
        ground_noise_sigma=0.02,
        static_structures=statics,
        dynamic_objects=dynamics,
        sensor_path=straight_path(frames, 1.0),
        points_per_surface=3.0,
    )


def load_scene(path) -> SceneSpec:
    """Read a scene spec from a YAML file."""
    import yaml

    with open(path) as f:
        raw = yaml.safe_load(f)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: scene file must be a mapping")
    known = {
        "seed",
        "ground_z",
        "ground_extent",
        "ground_noise_sigma",
        "static_structures",
        "dynamic_objects",
        "sensor_path",
        "points_per_surface",
    }
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"{path}: unknown scene keys {sorted(unknown)}")

    statics = tuple(
        StaticBox(center=tuple(b["center"]), size=tuple(b["size"]))
        for b in raw.get("static_structures", [])
    )
    dynamics = tuple(
        (
            OrientedBox(
                center=np.asarray(b["center"], dtype=float),
                size=np.asarray(b["size"], dtype=float),
                yaw=float(b.get("yaw", 0.0)),
                class_label=str(b.get("class", "car")),
                score=float(b.get("score", 1.0)),
            ),
            str(b.get("presence", "both")),
        )
        for b in raw.get("dynamic_objects", [])
    )
    path_spec = raw.get("sensor_path", [{"x": 0.0, "y": 0.0, "z": 0.0, "yaw": 0.0}])
    poses = tuple(
        PoseSE3.from_yaw(
            float(p.get("yaw", 0.0)),
            (float(p.get("x", 0.0)), float(p.get("y", 0.0)), float(p.get("z", 0.0))),
        )
        for p in path_spec
    )
    return SceneSpec(
        seed=int(raw.get("seed", 0)),
        ground_z=float(raw.get("ground_z", -1.7)),
        ground_extent=float(raw.get("ground_extent", 60.0)),
        ground_noise_sigma=float(raw.get("ground_noise_sigma", 0.02)),
        static_structures=statics,
        dynamic_objects=dynamics,
        sensor_path=poses,
        points_per_surface=float(raw.get("points_per_surface", 3.0)),
    )
