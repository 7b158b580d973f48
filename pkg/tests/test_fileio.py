import json
import struct

import numpy as np
import pytest

from stillmap.core import PointCloud, PoseSE3, Trajectory
from stillmap.errors import MalformedFileError
from stillmap.fileio import (
    DetectionRecord,
    read_cloud_ply,
    read_detections,
    read_poses,
    read_scan_binary,
    write_cloud_ply,
    write_detections,
    write_poses,
    write_scan_binary,
)

# --------------------------------------------------------------------- scans


def test_read_scan_binary_two_points(tmp_path):
    payload = struct.pack("<8f", 1, 2, 3, 0.5, 4, 5, 6, 0.25)
    f = tmp_path / "000003.bin"
    f.write_bytes(payload)
    cloud = read_scan_binary(f)
    assert len(cloud) == 2
    assert cloud.frame_id == 3
    np.testing.assert_allclose(cloud.xyz, [[1, 2, 3], [4, 5, 6]])
    np.testing.assert_allclose(cloud.intensity, [0.5, 0.25])


def test_read_scan_binary_empty(tmp_path):
    f = tmp_path / "000000.bin"
    f.write_bytes(b"")
    cloud = read_scan_binary(f)
    assert len(cloud) == 0


def test_read_scan_binary_bad_length(tmp_path):
    f = tmp_path / "000000.bin"
    f.write_bytes(b"\x00" * 17)
    with pytest.raises(MalformedFileError):
        read_scan_binary(f)


def test_read_scan_binary_nan_reports_record(tmp_path):
    payload = struct.pack("<8f", 1, 2, 3, 0.5, 4, float("nan"), 6, 0.25)
    f = tmp_path / "000000.bin"
    f.write_bytes(payload)
    with pytest.raises(MalformedFileError, match="record 1"):
        read_scan_binary(f)


def test_scan_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    cloud = PointCloud(
        rng.uniform(-50, 50, size=(500, 3)).astype(np.float32),
        rng.uniform(size=500).astype(np.float32),
        frame_id=7,
    )
    f = tmp_path / "000007.bin"
    write_scan_binary(cloud, f)
    back = read_scan_binary(f)
    np.testing.assert_array_equal(back.xyz, cloud.xyz)
    np.testing.assert_array_equal(back.intensity, cloud.intensity)


# --------------------------------------------------------------------- poses


def test_read_poses_identity_and_translation(tmp_path):
    f = tmp_path / "poses.txt"
    f.write_text("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 5 0 1 0 0 0 0 1 0\n")
    traj = read_poses(f)
    assert len(traj) == 2
    np.testing.assert_allclose(traj[0][1].matrix(), np.eye(4))
    np.testing.assert_allclose(traj[1][1].translation, [5, 0, 0])


def test_read_poses_wrong_token_count(tmp_path):
    f = tmp_path / "poses.txt"
    f.write_text("1 0 0 0 0 1 0 0 0 0 1\n")
    with pytest.raises(MalformedFileError):
        read_poses(f)


def test_read_poses_bad_determinant(tmp_path):
    f = tmp_path / "poses.txt"
    f.write_text("2 0 0 0 0 1 0 0 0 0 1 0\n")
    with pytest.raises(MalformedFileError):
        read_poses(f)


def test_read_poses_reorthonormalizes_slight_drift(tmp_path):
    r = PoseSE3.from_yaw(0.3).rotation + 1e-4
    line = " ".join(
        str(v) for v in np.hstack([r, np.zeros((3, 1))]).reshape(-1)
    )
    f = tmp_path / "poses.txt"
    f.write_text(line + "\n")
    traj = read_poses(f)
    rr = traj[0][1].rotation
    np.testing.assert_allclose(rr.T @ rr, np.eye(3), atol=1e-12)


def test_poses_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    entries = [
        (i, PoseSE3.from_yaw(rng.uniform(-3, 3), rng.uniform(-10, 10, size=3)))
        for i in range(5)
    ]
    f = tmp_path / "poses.txt"
    write_poses(Trajectory(entries), f)
    back = read_poses(f)
    for (fa, pa), (fb, pb) in zip(entries, back):
        assert fa == fb
        np.testing.assert_allclose(pa.matrix(), pb.matrix(), atol=1e-10)


# ----------------------------------------------------------------- detections


def test_read_detections_round_trip(tmp_path):
    rec = DetectionRecord(0, "Car", 0.9, (2.0, 0.0, -1.0), (1.8, 4.5, 1.6), 0.1)
    f = tmp_path / "det.jsonl"
    write_detections([rec], f)
    out = read_detections(f)
    assert set(out) == {0}
    assert out[0] == [rec]


def test_read_detections_empty_file(tmp_path):
    f = tmp_path / "det.jsonl"
    f.write_text("")
    assert read_detections(f) == {}


def test_read_detections_non_positive_size(tmp_path):
    f = tmp_path / "det.jsonl"
    f.write_text(
        json.dumps(
            {"frame": 0, "class": "Car", "score": 0.9, "center": [2, 0, -1],
             "size": [0, 4, 1.6], "yaw": 0.1}
        )
        + "\n"
    )
    with pytest.raises(ValueError, match="det.jsonl:1"):
        read_detections(f)


def test_read_detections_missing_field(tmp_path):
    f = tmp_path / "det.jsonl"
    f.write_text('{"frame": 0, "class": "Car"}\n')
    with pytest.raises(MalformedFileError, match=":1"):
        read_detections(f)


def test_read_detections_invalid_json_line_number(tmp_path):
    f = tmp_path / "det.jsonl"
    good = json.dumps(
        {"frame": 0, "class": "Car", "score": 0.9, "center": [2, 0, -1],
         "size": [1.8, 4.5, 1.6], "yaw": 0.1}
    )
    f.write_text(good + "\nnot json\n")
    with pytest.raises(MalformedFileError, match=":2"):
        read_detections(f)


def test_detections_grouped_in_file_order(tmp_path):
    recs = [
        DetectionRecord(1, "Car", 0.9, (0, 0, 0), (1, 1, 1), 0.0),
        DetectionRecord(0, "Pedestrian", 0.8, (1, 1, 1), (1, 1, 2), 0.5),
        DetectionRecord(1, "Truck", 0.7, (5, 5, 0), (2, 6, 3), -0.5),
    ]
    f = tmp_path / "det.jsonl"
    write_detections(recs, f)
    out = read_detections(f)
    assert [r.class_label for r in out[1]] == ["Car", "Truck"]
    assert out.get(2, []) == []


# ------------------------------------------------------------------------ ply


def test_ply_header_vertex_count(tmp_path):
    cloud = PointCloud([[1, 2, 3], [4, 5, 6]])
    f = tmp_path / "map.ply"
    write_cloud_ply(cloud, f)
    header = f.read_bytes().split(b"end_header")[0].decode()
    assert "element vertex 2" in header
    assert "format binary_little_endian 1.0" in header


def test_ply_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(2)
    xyz = rng.uniform(-100, 100, size=(1000, 3)).astype(np.float32)
    inten = rng.uniform(size=1000).astype(np.float32)
    cloud = PointCloud(xyz, inten)
    f = tmp_path / "map.ply"
    write_cloud_ply(cloud, f)
    back = read_cloud_ply(f)
    np.testing.assert_array_equal(back.xyz, cloud.xyz)
    np.testing.assert_array_equal(back.intensity, cloud.intensity)


def test_ply_empty_cloud(tmp_path):
    f = tmp_path / "map.ply"
    write_cloud_ply(PointCloud(np.zeros((0, 3))), f)
    header = f.read_bytes().split(b"end_header")[0].decode()
    assert "element vertex 0" in header
    assert len(read_cloud_ply(f)) == 0


def test_ply_rejects_garbage(tmp_path):
    f = tmp_path / "map.ply"
    f.write_bytes(b"not a ply file")
    with pytest.raises(MalformedFileError):
        read_cloud_ply(f)


def test_ply_rejects_truncated_body(tmp_path):
    cloud = PointCloud([[1, 2, 3], [4, 5, 6]])
    f = tmp_path / "map.ply"
    write_cloud_ply(cloud, f)
    f.write_bytes(f.read_bytes()[:-4])
    with pytest.raises(MalformedFileError):
        read_cloud_ply(f)


def test_readers_total_over_arbitrary_bytes(tmp_path):
    # every reader either parses or raises a typed error; never crashes
    rng = np.random.default_rng(3)
    readers = (read_scan_binary, read_poses, read_detections, read_cloud_ply)
    for i in range(50):
        blob = rng.integers(0, 256, size=int(rng.integers(0, 400)), dtype=np.uint8)
        f = tmp_path / f"{i:06d}.bin"
        f.write_bytes(blob.tobytes())
        for reader in readers:
            try:
                reader(f)
            except MalformedFileError:
                pass
