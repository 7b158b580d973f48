"""Dataset readers and writers.

Scans: KITTI-style `<frame:06d>.bin`, little-endian float32 (x, y, z,
intensity) records. Poses: one row-major 3x4 rigid transform per line.
Detections: newline-delimited JSON records in the LiDAR/sensor frame.
Maps: binary little-endian PLY. Scans are float32 on disk and widened to
float64 in memory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import PointCloud, PoseSE3, Trajectory, orthonormalize, wrap_angle
from .errors import MalformedFileError

SCAN_RECORD_BYTES = 16


@dataclass(frozen=True)
class DetectionRecord:
    """One detected box for one frame, in the sensor frame."""

    frame_id: int
    class_label: str
    score: float
    center: tuple[float, float, float]
    size: tuple[float, float, float]
    yaw: float

    def __post_init__(self):
        if any(s <= 0 for s in self.size):
            raise ValueError(f"non-positive box size {self.size}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


def _frame_id_from_stem(path: Path) -> int:
    stem = path.stem
    return int(stem) if stem.isdigit() else 0


def read_scan_binary(path) -> PointCloud:
    """Parse a binary scan file; frame_id comes from the filename stem."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) % SCAN_RECORD_BYTES != 0:
        raise MalformedFileError(
            f"{path}: length {len(raw)} is not a multiple of {SCAN_RECORD_BYTES}"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(-1, 4).astype(np.float64)
    bad = ~np.isfinite(data).all(axis=1)
    if bad.any():
        raise MalformedFileError(
            f"{path}: non-finite values at record {int(np.flatnonzero(bad)[0])}"
        )
    return PointCloud(data[:, :3], data[:, 3], _frame_id_from_stem(path))


def write_scan_binary(cloud: PointCloud, path) -> None:
    """Inverse of read_scan_binary (values rounded to float32)."""
    path = Path(path)
    data = np.zeros((len(cloud), 4), dtype="<f4")
    data[:, :3] = cloud.xyz
    if cloud.intensity is not None:
        data[:, 3] = cloud.intensity
    path.write_bytes(data.tobytes())


def read_scan_dir(path) -> list[PointCloud]:
    """All `*.bin` scans in a directory, ordered by frame id."""
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"scan directory not found: {path}")
    files = sorted(path.glob("*.bin"), key=_frame_id_from_stem)
    return [read_scan_binary(f) for f in files]


def _read_text(path: Path) -> str:
    try:
        return path.read_text()
    except UnicodeDecodeError as e:
        raise MalformedFileError(f"{path}: not valid UTF-8 ({e.reason})") from e


def read_poses(path) -> Trajectory:
    """Parse a pose file: line i becomes frame i's pose."""
    path = Path(path)
    entries = []
    frame = 0
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != 12:
            raise MalformedFileError(f"{path}:{lineno}: expected 12 values, got {len(tokens)}")
        try:
            vals = np.array([float(t) for t in tokens]).reshape(3, 4)
        except ValueError as e:
            raise MalformedFileError(f"{path}:{lineno}: {e}") from e
        if not np.isfinite(vals).all():
            raise MalformedFileError(f"{path}:{lineno}: non-finite value")
        r = vals[:, :3]
        if abs(np.linalg.det(r) - 1.0) > 1e-2:
            raise MalformedFileError(f"{path}:{lineno}: rotation determinant far from 1")
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9:
            r = orthonormalize(r)
        entries.append((frame, PoseSE3(r, vals[:, 3])))
        frame += 1
    return Trajectory(entries)


def write_poses(trajectory: Trajectory, path) -> None:
    """One 3x4 row-major transform per line, in trajectory order."""
    lines = []
    for _, pose in trajectory:
        m = np.hstack([pose.rotation, pose.translation[:, None]])
        lines.append(" ".join(format(v, ".12g") for v in m.reshape(-1)))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


_DETECTION_FIELDS = ("frame", "class", "score", "center", "size", "yaw")


def read_detections(path) -> dict[int, list[DetectionRecord]]:
    """Group detection records by frame; frames absent from the file are empty."""
    path = Path(path)
    out: dict[int, list[DetectionRecord]] = {}
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedFileError(f"{path}:{lineno}: invalid JSON ({e.msg})") from e
        if not isinstance(obj, dict) or not all(k in obj for k in _DETECTION_FIELDS):
            missing = [k for k in _DETECTION_FIELDS if not isinstance(obj, dict) or k not in obj]
            raise MalformedFileError(f"{path}:{lineno}: missing fields {missing}")
        try:
            size = tuple(float(v) for v in obj["size"])
            center = tuple(float(v) for v in obj["center"])
            if len(size) != 3 or len(center) != 3:
                raise MalformedFileError(f"{path}:{lineno}: center and size must have 3 values")
            if any(s <= 0 for s in size):
                raise ValueError(f"{path}:{lineno}: non-positive size {list(size)}")
            vals = [*center, *size, float(obj["score"]), float(obj["yaw"])]
            if not all(math.isfinite(v) for v in vals):
                raise MalformedFileError(f"{path}:{lineno}: non-finite value")
            rec = DetectionRecord(
                frame_id=int(obj["frame"]),
                class_label=str(obj["class"]),
                score=float(obj["score"]),
                center=center,
                size=size,
                yaw=float(obj["yaw"]),
            )
        except (TypeError, KeyError) as e:
            raise MalformedFileError(f"{path}:{lineno}: {e}") from e
        except ValueError as e:
            # keep the error class, make sure the line number is mentioned
            if str(e).startswith(str(path)):
                raise
            raise type(e)(f"{path}:{lineno}: {e}") from e
        out.setdefault(rec.frame_id, []).append(rec)
    return out


def write_detections(records, path) -> None:
    """One JSON record per line; inverse of read_detections."""
    lines = []
    for rec in records:
        lines.append(
            json.dumps(
                {
                    "frame": rec.frame_id,
                    "class": rec.class_label,
                    "score": rec.score,
                    "center": list(rec.center),
                    "size": list(rec.size),
                    "yaw": rec.yaw,
                },
                separators=(", ", ": "),
            )
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def write_cloud_ply(cloud: PointCloud, path) -> None:
    """Binary little-endian PLY with float32 x, y, z (+ intensity if present)."""
    props = ["property float x", "property float y", "property float z"]
    ncols = 3
    if cloud.intensity is not None:
        props.append("property float intensity")
        ncols = 4
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {len(cloud)}\n" + "\n".join(props) + "\nend_header\n"
    )
    data = np.zeros((len(cloud), ncols), dtype="<f4")
    data[:, :3] = cloud.xyz
    if ncols == 4:
        data[:, 3] = cloud.intensity
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(data.tobytes())


def read_cloud_ply(path) -> PointCloud:
    """Read a PLY written by write_cloud_ply."""
    path = Path(path)
    raw = path.read_bytes()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise MalformedFileError(f"{path}: not a PLY file")
    header = raw[:end].decode("ascii", errors="replace").splitlines()
    if "format binary_little_endian 1.0" not in header[1]:
        raise MalformedFileError(f"{path}: unsupported PLY format")
    count = None
    props = []
    for line in header:
        if line.startswith("element vertex"):
            count = int(line.split()[-1])
        elif line.startswith("property"):
            tokens = line.split()
            if tokens[1] != "float":
                raise MalformedFileError(f"{path}: unsupported property type {tokens[1]}")
            props.append(tokens[2])
    if count is None or props[:3] != ["x", "y", "z"]:
        raise MalformedFileError(f"{path}: vertex element with x, y, z floats required")
    body = raw[end + len(b"end_header\n"):]
    ncols = len(props)
    expected = count * ncols * 4
    if len(body) < expected:
        raise MalformedFileError(f"{path}: truncated body ({len(body)} < {expected} bytes)")
    data = np.frombuffer(body[:expected], dtype="<f4").reshape(count, ncols).astype(np.float64)
    inten = data[:, props.index("intensity")] if "intensity" in props else None
    return PointCloud(data[:, :3], inten, _frame_id_from_stem(path))
