"""Trajectory-synchronization evaluation: DTW, similarity, annotations.

The similarity pipeline, pinned by regression tests:

1. normalize each trajectory independently: translate its centroid to
   the origin and scale so the max centroid distance is 1 (scaling is
   skipped for degenerate all-equal trajectories);
2. resample both onto a common uniform grid spanning the overlap of
   their time ranges, with N = max(len(a), len(b)) samples;
3. run DTW with Euclidean point cost and steps (i-1,j), (i,j-1),
   (i-1,j-1); the distance is the cost sum along the optimal
   boundary-matched path (backtrack ties prefer diagonal, then (i-1,j),
   then (i,j-1));
4. similarity = 1 / (1 + distance / path_length).

This mapping is monotone, bounded in (0, 1] and equals 1 exactly at
perfect synchronization. The lag estimate is the integer sample shift
(positive = second trajectory lags the first) minimizing the mean
distance between shift-aligned normalized points, in seconds.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

ANNOTATION_HEADER = ["frame", "label", "xmin", "ymin", "xmax", "ymax"]


class AnnotationError(ValueError):
    """Malformed annotation CSV content."""


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered planar path in consistent units (meters or pixels)."""

    times: tuple[float, ...]
    points: tuple[tuple[float, float], ...]
    label: str = ""
    units: str = "m"

    def __post_init__(self) -> None:
        if len(self.times) == 0:
            raise ValueError("trajectory must have at least one point")
        if len(self.times) != len(self.points):
            raise ValueError("times and points must have equal length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class SyncReport:
    """DTW distance (normalized space), similarity, path length, lag."""

    dtw_distance: float
    similarity: float
    path_length: int
    lag_estimate: float


def dtw(a: Sequence, b: Sequence) -> tuple[float, list[tuple[int, int]]]:
    """Dynamic time warping distance and optimal alignment path.

    Points may be scalars or same-length coordinate tuples; the cost is
    the Euclidean distance. The path is monotone and contiguous from
    (0, 0) to (len(a)-1, len(b)-1).
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("dtw: sequences must be non-empty")
    A = [_as_point(p) for p in a]
    B = [_as_point(p) for p in b]
    if len({len(p) for p in A} | {len(p) for p in B}) != 1:
        raise ValueError("dtw: points must share one dimensionality")
    n, m = len(A), len(B)
    D = np.empty((n, m))
    hypot = math.hypot
    prev: list[float] | None = None
    for i in range(n):
        ai = A[i]
        row = [0.0] * m
        for j in range(m):
            c = hypot(*(x - y for x, y in zip(ai, B[j])))
            if i == 0 and j == 0:
                row[j] = c
            elif i == 0:
                row[j] = c + row[j - 1]
            elif j == 0:
                row[j] = c + prev[j]
            else:
                best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
                if row[j - 1] < best:
                    best = row[j - 1]
                row[j] = c + best
        D[i] = row
        prev = row
    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while i or j:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = D[i - 1, j - 1], D[i - 1, j], D[i, j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return float(D[n - 1, m - 1]), path


def _as_point(p) -> tuple[float, ...]:
    if isinstance(p, (int, float)):
        return (float(p),)
    return tuple(float(c) for c in p)


def _normalize(points: np.ndarray) -> np.ndarray:
    centered = points - points.mean(axis=0)
    scale = float(np.linalg.norm(centered, axis=1).max())
    if scale > 0.0:
        centered = centered / scale
    return centered


def _prepare(a: Trajectory, b: Trajectory) -> tuple[np.ndarray, np.ndarray, float]:
    """Normalize then resample both trajectories onto the common grid."""
    t0 = max(a.times[0], b.times[0])
    t1 = min(a.times[-1], b.times[-1])
    if t1 < t0:
        raise ValueError("trajectories do not overlap in time")
    n = max(len(a), len(b))
    grid = np.linspace(t0, t1, n) if n > 1 else np.array([t0])
    resampled = []
    for traj in (a, b):
        points = _normalize(np.asarray(traj.points, dtype=float))
        times = np.asarray(traj.times, dtype=float)
        resampled.append(
            np.stack([np.interp(grid, times, points[:, k]) for k in range(2)], axis=1)
        )
    grid_dt = (t1 - t0) / (n - 1) if n > 1 else 0.0
    return resampled[0], resampled[1], grid_dt


def similarity(a: Trajectory, b: Trajectory) -> float:
    """Shape-and-timing similarity in (0, 1]; 1 means perfectly in sync."""
    A, B, _ = _prepare(a, b)
    distance, path = dtw([tuple(p) for p in A], [tuple(p) for p in B])
    return 1.0 / (1.0 + distance / len(path))


def _lag_samples(A: np.ndarray, B: np.ndarray) -> int:
    """Integer shift minimizing mean distance of shift-aligned points.

    Positive shift means B lags A. Ties prefer the smaller magnitude.
    """
    n = len(A)
    best_shift = 0
    best_score = math.inf
    for s in sorted(range(-(n // 2), n // 2 + 1), key=lambda v: (abs(v), v)):
        if s >= 0:
            diffs = A[: n - s] - B[s:]
        else:
            diffs = A[-s:] - B[: n + s]
        if len(diffs) == 0:
            continue
        score = float(np.linalg.norm(diffs, axis=1).mean())
        if score < best_score:
            best_score = score
            best_shift = s
    return best_shift


def sync_report(a: Trajectory, b: Trajectory) -> SyncReport:
    """Bundle DTW distance, similarity and lag estimate for two paths."""
    A, B, grid_dt = _prepare(a, b)
    distance, path = dtw([tuple(p) for p in A], [tuple(p) for p in B])
    return SyncReport(
        dtw_distance=distance,
        similarity=1.0 / (1.0 + distance / len(path)),
        path_length=len(path),
        lag_estimate=_lag_samples(A, B) * grid_dt,
    )


def load_annotations(path: str | Path, fps: float = 30.0) -> dict[str, Trajectory]:
    """Read bounding-box annotations into per-label center trajectories.

    Expects the header ``frame,label,xmin,ymin,xmax,ymax``. Each row adds
    the box center at t = frame / fps (pixel units). Frames are sorted
    per label; missing frames are allowed and never interpolated.
    """
    if fps <= 0:
        raise ValueError(f"fps must be > 0, got {fps}")
    per_label: dict[str, dict[int, tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise AnnotationError(f"{path}: empty file") from None
        if [h.strip() for h in header] != ANNOTATION_HEADER:
            raise AnnotationError(
                f"{path}: expected header {','.join(ANNOTATION_HEADER)}, got {','.join(header)}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise AnnotationError(f"{path} line {line_no}: expected 6 fields, got {len(row)}")
            try:
                frame = int(row[0])
                xmin, ymin, xmax, ymax = (float(v) for v in row[2:6])
            except ValueError as exc:
                raise AnnotationError(f"{path} line {line_no}: {exc}") from exc
            if frame < 0:
                raise AnnotationError(f"{path} line {line_no}: negative frame number {frame}")
            if xmax < xmin:
                raise AnnotationError(f"{path} line {line_no}: xmax {xmax} < xmin {xmin}")
            if ymax < ymin:
                raise AnnotationError(f"{path} line {line_no}: ymax {ymax} < ymin {ymin}")
            label = row[1]
            boxes = per_label.setdefault(label, {})
            if frame in boxes:
                raise AnnotationError(f"{path} line {line_no}: duplicate frame {frame} for {label!r}")
            boxes[frame] = ((xmin + xmax) / 2.0, (ymin + ymax) / 2.0)
    trajectories: dict[str, Trajectory] = {}
    for label, boxes in per_label.items():
        frames = sorted(boxes)
        trajectories[label] = Trajectory(
            times=tuple(f / fps for f in frames),
            points=tuple(boxes[f] for f in frames),
            label=label,
            units="px",
        )
    return trajectories
