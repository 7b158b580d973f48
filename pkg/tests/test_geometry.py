import numpy as np
import pytest

from stillmap.core import PointCloud, PoseSE3, transform_cloud
from stillmap.errors import OutOfRangeError
from stillmap.geometry import (
    OrientedBox,
    RangeSpec,
    VoxelGridSpec,
    downsample,
    obb_vertices,
    point_in_obb,
    points_in_obb,
    range_filter,
    voxel_downsample,
    voxel_index,
)
from tests.conftest import random_pose

# ---------------------------------------------------------------- range filter


def test_range_filter_drops_far_point():
    cloud = PointCloud([[0, 0, 0], [100, 0, 0]])
    bounds = RangeSpec((-50, -50, -50), (50, 50, 50))
    out, kept = range_filter(cloud, bounds)
    assert len(out) == 1
    np.testing.assert_array_equal(out.xyz[0], [0, 0, 0])
    np.testing.assert_array_equal(kept, [0])


def test_range_filter_identity_on_bounding_box():
    rng = np.random.default_rng(0)
    cloud = PointCloud(rng.uniform(-3, 7, size=(200, 3)))
    bounds = RangeSpec(cloud.xyz.min(axis=0), cloud.xyz.max(axis=0))
    out, kept = range_filter(cloud, bounds)
    assert len(out) == len(cloud)
    np.testing.assert_array_equal(kept, np.arange(len(cloud)))


def test_range_filter_matches_per_point_oracle():
    rng = np.random.default_rng(1)
    cloud = PointCloud(rng.uniform(-10, 10, size=(1000, 3)))
    bounds = RangeSpec((0, 0, 0), (10, 10, 10))
    out, kept = range_filter(cloud, bounds)
    expected = [
        i
        for i, p in enumerate(cloud.xyz)
        if all(0 <= p[a] <= 10 for a in range(3))
    ]
    np.testing.assert_array_equal(kept, expected)
    np.testing.assert_array_equal(out.xyz, cloud.xyz[expected])
    dropped = sorted(set(range(len(cloud))) - set(expected))
    for i in dropped:
        assert not all(0 <= cloud.xyz[i][a] <= 10 for a in range(3))


def test_range_spec_validation():
    with pytest.raises(ValueError):
        RangeSpec((0, 0, 0), (1, -1, 1))


# ---------------------------------------------------------------- voxel index


def _unit_grid():
    return VoxelGridSpec(RangeSpec((0, 0, 0), (3, 3, 3)), 1.0)


def test_voxel_index_min_bound():
    assert voxel_index((0.0, 0.0, 0.0), _unit_grid()) == (0, 0, 0)


def test_voxel_index_floor():
    assert voxel_index((2.5, 0.1, 0.9), _unit_grid()) == (2, 0, 0)


def test_voxel_index_max_bound_clamps():
    assert voxel_index((3.0, 3.0, 3.0), _unit_grid()) == (2, 2, 2)


def test_voxel_index_out_of_range():
    with pytest.raises(OutOfRangeError):
        voxel_index((3.1, 0.0, 0.0), _unit_grid())


# ----------------------------------------------------------- voxel downsample


def test_downsample_coincident_points():
    cloud = PointCloud([[0.5, 0.5, 0.5], [0.5, 0.5, 0.5]])
    out = voxel_downsample(cloud, _unit_grid())
    assert len(out) == 1
    np.testing.assert_allclose(out.xyz[0], [0.5, 0.5, 0.5])


def test_downsample_centroid():
    cloud = PointCloud([[0.1, 0.0, 0.0], [0.3, 0.0, 0.0]])
    grid = VoxelGridSpec(RangeSpec((0, 0, 0), (1, 1, 1)), 1.0)
    out = voxel_downsample(cloud, grid)
    assert len(out) == 1
    np.testing.assert_allclose(out.xyz[0], [0.2, 0.0, 0.0], atol=1e-15)


def _voxel_oracle(xyz, grid):
    """Hash-map brute-force per-voxel centroids, lexicographic key order."""
    b = grid.bounds
    dims = grid.dims
    groups = {}
    for p in xyz:
        if not ((p >= b.min_bound).all() and (p <= b.max_bound).all()):
            continue
        idx = tuple(
            min(int(np.floor((p[a] - b.min_bound[a]) / grid.voxel_size[a])), dims[a] - 1)
            for a in range(3)
        )
        groups.setdefault(idx, []).append(p)
    keys = sorted(groups)
    return np.array([np.mean(groups[k], axis=0) for k in keys]).reshape(-1, 3)


def test_downsample_matches_brute_force_oracle():
    rng = np.random.default_rng(2)
    cloud = PointCloud(rng.uniform(-6, 6, size=(10_000, 3)))
    grid = VoxelGridSpec(RangeSpec((-5, -5, -5), (5, 5, 5)), (0.8, 1.1, 0.9))
    out = voxel_downsample(cloud, grid)
    expected = _voxel_oracle(cloud.xyz, grid)
    assert out.xyz.shape == expected.shape
    np.testing.assert_allclose(out.xyz, expected, atol=1e-12)


def test_downsample_one_point_per_voxel_inside_bounds():
    rng = np.random.default_rng(3)
    cloud = PointCloud(rng.uniform(-5, 5, size=(5000, 3)))
    grid = VoxelGridSpec(RangeSpec((-5, -5, -5), (5, 5, 5)), 1.0)
    out = voxel_downsample(cloud, grid)
    cells = [voxel_index(p, grid) for p in out.xyz]
    assert len(set(cells)) == len(cells)
    for p, cell in zip(out.xyz, cells):
        lo = grid.bounds.min_bound + np.array(cell) * grid.voxel_size
        assert ((p >= lo - 1e-12) & (p <= lo + grid.voxel_size + 1e-12)).all()


def test_grid_aligned_downsample_stable_under_growth():
    rng = np.random.default_rng(4)
    a = rng.uniform(-4, 4, size=(500, 3))
    b = rng.uniform(6, 9, size=(200, 3))
    small = downsample(PointCloud(a), 0.5)
    grown = downsample(PointCloud(np.vstack([a, b])), 0.5)
    # cells of the original region are identical: same boundaries, same points
    mask = grown.xyz[:, 0] < 5
    np.testing.assert_allclose(np.sort(grown.xyz[mask], axis=0), np.sort(small.xyz, axis=0), atol=1e-12)


# ------------------------------------------------------------------- obb math


def test_obb_vertices_axis_aligned_cube():
    box = OrientedBox(center=(0, 0, 0), size=(2, 2, 2), yaw=0.0)
    verts = obb_vertices(box)
    expected = np.array(
        [[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float
    )
    np.testing.assert_allclose(verts, expected, atol=1e-15)


def test_obb_vertices_cube_rotation_symmetry():
    plain = obb_vertices(OrientedBox(center=(0, 0, 0), size=(2, 2, 2), yaw=0.0))
    turned = obb_vertices(OrientedBox(center=(0, 0, 0), size=(2, 2, 2), yaw=np.pi / 2))
    a = {tuple(np.round(v, 9)) for v in plain}
    b = {tuple(np.round(v, 9)) for v in turned}
    assert a == b


def test_obb_vertices_rotated_extent():
    # size (2, 4, 2) turned a quarter: the 4 m length now spans x in [-1, 3]
    box = OrientedBox(center=(1, 1, 0), size=(2, 4, 2), yaw=np.pi / 2)
    verts = obb_vertices(box)
    assert verts[:, 0].min() == pytest.approx(-1.0)
    assert verts[:, 0].max() == pytest.approx(3.0)
    # numeric cross-check: apply R to each offset
    r = box.rotation()
    offsets = np.array(
        [[sx, sy, sz] for sx in (-1, 1) for sy in (-2, 2) for sz in (-1, 1)], dtype=float
    )
    np.testing.assert_allclose(verts, offsets @ r.T + box.center, atol=1e-12)


_EDGES = {
    "w": [(0, 4), (1, 5), (2, 6), (3, 7)],
    "l": [(0, 2), (1, 3), (4, 6), (5, 7)],
    "h": [(0, 1), (2, 3), (4, 5), (6, 7)],
}


def test_obb_vertices_edge_lengths_and_centroid():
    rng = np.random.default_rng(5)
    for _ in range(25):
        size = rng.uniform(0.5, 6.0, size=3)
        box = OrientedBox(
            center=rng.uniform(-10, 10, size=3), size=size, yaw=rng.uniform(-np.pi, np.pi)
        )
        verts = obb_vertices(box)
        w, l, h = size
        for name, length in (("w", w), ("l", l), ("h", h)):
            for a, b in _EDGES[name]:
                assert np.linalg.norm(verts[a] - verts[b]) == pytest.approx(length, abs=1e-9)
        # face diagonals and the space diagonal
        assert np.linalg.norm(verts[0] - verts[6]) == pytest.approx(np.hypot(w, l), abs=1e-9)
        assert np.linalg.norm(verts[0] - verts[5]) == pytest.approx(np.hypot(w, h), abs=1e-9)
        assert np.linalg.norm(verts[0] - verts[3]) == pytest.approx(np.hypot(l, h), abs=1e-9)
        assert np.linalg.norm(verts[0] - verts[7]) == pytest.approx(
            np.sqrt(w * w + l * l + h * h), abs=1e-9
        )
        np.testing.assert_allclose(verts.mean(axis=0), box.center, atol=1e-9)


def test_point_in_obb_center_always_inside():
    rng = np.random.default_rng(6)
    for _ in range(10):
        box = OrientedBox(
            center=rng.uniform(-5, 5, size=3),
            size=rng.uniform(0.1, 4, size=3),
            yaw=rng.uniform(-np.pi, np.pi),
        )
        assert point_in_obb(box.center, box)


def test_point_in_obb_quarter_turn_example():
    turned = OrientedBox(center=(0, 0, 0), size=(2, 4, 2), yaw=np.pi / 2)
    straight = OrientedBox(center=(0, 0, 0), size=(2, 4, 2), yaw=0.0)
    p = (1.9, 0.0, 0.0)
    assert point_in_obb(p, turned)
    assert not point_in_obb(p, straight)


_FACES = [
    (0, 1, 3, 2),
    (4, 5, 7, 6),
    (0, 1, 5, 4),
    (2, 3, 7, 6),
    (0, 2, 6, 4),
    (1, 3, 7, 5),
]


def _halfspace_oracle(point, box, margin):
    """Containment in the convex hull of obb_vertices via face half-spaces.

    Returns None for points within 1e-9 of any (margin-expanded) face.
    """
    verts = obb_vertices(box)
    centroid = verts.mean(axis=0)
    inside = True
    for face in _FACES:
        fv = verts[list(face)]
        n = np.cross(fv[1] - fv[0], fv[2] - fv[0])
        n = n / np.linalg.norm(n)
        face_center = fv.mean(axis=0)
        if n @ (face_center - centroid) < 0:
            n = -n
        d = n @ (np.asarray(point, dtype=float) - face_center)
        if abs(d - margin) <= 1e-9:
            return None
        if d > margin:
            inside = False
    return inside


def test_point_in_obb_agrees_with_halfspace_oracle():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(10_000):
        box = OrientedBox(
            center=rng.uniform(-3, 3, size=3),
            size=rng.uniform(0.2, 5, size=3),
            yaw=rng.uniform(-np.pi, np.pi),
        )
        margin = float(rng.choice([0.0, 0.1, 0.5]))
        point = rng.uniform(-6, 6, size=3)
        expected = _halfspace_oracle(point, box, margin)
        if expected is None:
            continue
        assert point_in_obb(point, box, margin) == expected
        checked += 1
    assert checked > 9000


def test_point_in_obb_rigid_invariance():
    rng = np.random.default_rng(8)
    for _ in range(200):
        box = OrientedBox(
            center=rng.uniform(-3, 3, size=3),
            size=rng.uniform(0.2, 5, size=3),
            yaw=rng.uniform(-np.pi, np.pi),
        )
        point = rng.uniform(-6, 6, size=3)
        local = box.rotation().T @ (point - box.center)
        # stay off the boundary so both sides agree robustly
        if np.min(np.abs(np.abs(local) - box.half_extents)) < 1e-6:
            continue
        pose = random_pose(rng)
        moved_point = pose.apply(point)
        moved_box = OrientedBox(
            center=pose.apply(box.center),
            size=box.size,
            yaw=box.yaw + pose.yaw,
            class_label=box.class_label,
            score=box.score,
        )
        assert point_in_obb(point, box) == point_in_obb(moved_point, moved_box)


def test_points_in_obb_matches_scalar():
    rng = np.random.default_rng(9)
    box = OrientedBox(center=(1, -2, 0.5), size=(2, 3, 1.5), yaw=0.7)
    pts = rng.uniform(-4, 4, size=(500, 3))
    mask = points_in_obb(pts, box, margin=0.1)
    for p, m in zip(pts, mask):
        assert m == point_in_obb(p, box, margin=0.1)
