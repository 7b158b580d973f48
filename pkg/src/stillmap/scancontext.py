"""Polar-grid place-recognition descriptor and its rotation-searching distance.

A descriptor bins a sensor-frame scan by radius (rings) and azimuth
(sectors); each cell holds the max z of its points (NaN when empty). The
ring key summarizes per-ring occupancy for cheap candidate search. Distance
is the minimum over cyclic sector shifts of the mean column-wise cosine
distance; a shift of s columns corresponds to a yaw of s * (2*pi / sectors).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import PointCloud
from .errors import DimensionMismatchError


@dataclass(frozen=True)
class ScanContextConfig:
    num_rings: int = 20
    num_sectors: int = 60
    max_radius: float = 80.0
    exclusion_window: int = 50
    ring_key_candidates: int = 10
    loop_threshold: float = 0.2


@dataclass(frozen=True)
class ScanContext:
    """matrix: (rings, sectors) max-height grid, NaN = empty bin.
    ring_key: per-ring fraction of occupied sectors."""

    matrix: np.ndarray
    ring_key: np.ndarray

    @property
    def num_sectors(self) -> int:
        return self.matrix.shape[1]


def scan_context_descriptor(
    cloud: PointCloud, config: ScanContextConfig = ScanContextConfig()
) -> ScanContext:
    """Descriptor of a sensor-frame cloud. Points at or beyond max_radius
    are ignored."""
    if len(cloud) == 0:
        raise ValueError("cannot describe an empty cloud")
    m = kernels.scan_context_matrix(
        cloud.xyz, config.num_rings, config.num_sectors, config.max_radius
    )
    occupied = np.isfinite(m)
    matrix = np.where(occupied, m, np.nan)
    ring_key = occupied.sum(axis=1) / config.num_sectors
    return ScanContext(matrix=matrix, ring_key=ring_key)


def _column_similarity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-column cosine similarity, clamped to [0, 1].

    Cells hold raw heights (possibly negative), so cosines below zero are
    treated as fully dissimilar. Zero-norm columns match only each other.
    """
    dots = (a * b).sum(axis=0)
    na = np.linalg.norm(a, axis=0)
    nb = np.linalg.norm(b, axis=0)
    both_zero = (na == 0) & (nb == 0)
    denom = np.where((na == 0) | (nb == 0), 1.0, na * nb)
    sim = np.where(both_zero, 1.0, dots / denom)
    return np.clip(sim, 0.0, 1.0)


def scan_context_distance(a: ScanContext, b: ScanContext):
    """(distance in [0, 1], best sector shift).

    distance = min over shifts s of the mean over non-mutually-empty columns
    of 1 - cos(column of a, column of b shifted by s); mutually empty column
    pairs are excluded. All-empty-vs-anything is 1 by convention.
    """
    if a.matrix.shape != b.matrix.shape:
        raise DimensionMismatchError(
            f"descriptor shapes differ: {a.matrix.shape} vs {b.matrix.shape}"
        )
    num_sectors = a.num_sectors
    am = np.nan_to_num(a.matrix, nan=0.0)
    bm = np.nan_to_num(b.matrix, nan=0.0)
    a_empty = np.isnan(a.matrix).all(axis=0)
    b_empty = np.isnan(b.matrix).all(axis=0)

    best_dist = 1.0
    best_shift = 0
    for s in range(num_sectors):
        bs = np.roll(bm, -s, axis=1)
        included = ~(a_empty & np.roll(b_empty, -s))
        if not included.any():
            continue
        sim = _column_similarity(am[:, included], bs[:, included])
        dist = float(np.mean(1.0 - sim))
        if dist < best_dist:
            best_dist = dist
            best_shift = s
    return best_dist, best_shift


def shift_to_yaw(shift: int, num_sectors: int) -> float:
    """Yaw rotating the first descriptor's cloud onto the second's frame."""
    return shift * (2.0 * np.pi / num_sectors)


def detect_loop(descriptor_db, current: ScanContext, current_frame: int, config: ScanContextConfig):
    """Best loop candidate below the threshold, or None.

    descriptor_db is a sequence of (frame_id, ScanContext). Only frames older
    than current_frame - exclusion_window are considered; the full distance is
    evaluated for the ring_key_candidates nearest ring keys.
    """
    cutoff = current_frame - config.exclusion_window
    candidates = [(fid, desc) for fid, desc in descriptor_db if fid < cutoff]
    if not candidates:
        return None
    keys = np.stack([desc.ring_key for _, desc in candidates])
    d = np.linalg.norm(keys - current.ring_key, axis=1)
    nearest = np.argsort(d, kind="stable")[: config.ring_key_candidates]

    best = None
    for i in nearest:
        fid, desc = candidates[int(i)]
        dist, _ = scan_context_distance(current, desc)
        if best is None or dist < best[1]:
            best = (fid, dist)
    if best is not None and best[1] < config.loop_threshold:
        return best
    return None
