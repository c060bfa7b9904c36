"""Point clustering and rebar-pattern geometry.

Lines are parametrized by an axial angle in [0, 180) degrees and the
signed perpendicular offset of the line from the origin; two lines are
parallel when their angular difference on the half-circle is within
tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _kernels as K


class Point2D(NamedTuple):
    x: float
    y: float


@dataclass
class ClusterResult:
    """Index partition: every input index lands in one cluster or in noise."""

    clusters: list[list[int]]
    noise: list[int]


@dataclass
class FittedLine:
    angle_deg: float
    distance_origin: float
    inliers: list[int]
    rms_residual: float

    def foot_point(self) -> tuple[float, float]:
        """Perpendicular foot of the origin on the line."""
        n = _normal(self.angle_deg)
        return (self.distance_origin * n[0], self.distance_origin * n[1])


@dataclass
class RebarPattern:
    lines: list[FittedLine]
    mean_spacing_px: float
    mean_angle_deg: float
    parallel: bool
    parallel_group: tuple[int, ...] = ()


def _as_array(points: Iterable) -> np.ndarray:
    arr = np.asarray([(p[0], p[1]) for p in points], dtype=np.float64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if not np.isfinite(arr).all():
        raise ValueError("points must be finite")
    return arr


def _normal(angle_deg: float) -> tuple[float, float]:
    t = math.radians(angle_deg)
    return (-math.sin(t), math.cos(t))


def angular_difference_deg(a: float, b: float) -> float:
    """Distance between two axial angles on the half-circle, in [0, 90]."""
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


def dbscan(points: Sequence, eps: float, min_pts: int) -> ClusterResult:
    """Density-based clustering with noise.

    A point is core when at least min_pts points (itself included) lie
    within Euclidean distance eps; clusters are maximal density-connected
    sets, expanded to completion in input order so results are
    reproducible. Border points join the earliest-seeded cluster that
    reaches them.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    pts = _as_array(points)
    labels = K.dbscan_labels(pts, float(eps), int(min_pts))
    k = int(labels.max()) + 1 if labels.size else 0
    clusters = [np.flatnonzero(labels == c).tolist() for c in range(k)]
    noise = np.flatnonzero(labels == -1).tolist()
    return ClusterResult(clusters=clusters, noise=noise)


def fit_line(points: Sequence) -> FittedLine:
    """Total-least-squares line through 2D points.

    Minimizes perpendicular distances, so vertical lines are first-class.
    The direction angle comes from the closed-form orientation of the
    2x2 scatter matrix: theta = atan2(2 Sxy, Sxx - Syy) / 2.
    """
    pts = _as_array(points)
    n = len(pts)
    if n < 2:
        raise ValueError("need at least 2 points")
    c = pts.mean(axis=0)
    d = pts - c
    if not (np.ptp(d[:, 0]) > 0 or np.ptp(d[:, 1]) > 0):
        raise ValueError("points are all coincident")

    sxx = float(np.dot(d[:, 0], d[:, 0]))
    syy = float(np.dot(d[:, 1], d[:, 1]))
    sxy = float(np.dot(d[:, 0], d[:, 1]))
    theta = 0.5 * math.atan2(2.0 * sxy, sxx - syy)
    angle = math.degrees(theta) % 180.0

    nx, ny = _normal(angle)
    offset = nx * c[0] + ny * c[1]
    lam_min = 0.5 * (sxx + syy) - math.hypot(0.5 * (sxx - syy), sxy)
    rms = math.sqrt(max(lam_min, 0.0) / n)
    return FittedLine(
        angle_deg=angle,
        distance_origin=float(offset),
        inliers=list(range(n)),
        rms_residual=rms,
    )


def _axial_mean_deg(angles: Sequence[float]) -> float:
    """Circular mean of 180-degree-periodic angles (double-angle trick)."""
    doubled = np.radians(np.asarray(angles, dtype=np.float64) * 2.0)
    s = float(np.sin(doubled).mean())
    c = float(np.cos(doubled).mean())
    return (math.degrees(math.atan2(s, c)) / 2.0) % 180.0


def detect_pattern(
    cluster_centroids: Sequence,
    eps: float,
    min_pts: int,
    angle_tol_deg: float,
) -> RebarPattern:
    """Cluster centroids, fit one line per cluster, group parallel lines.

    The pattern is parallel when some angular group holds >= 2 lines; its
    spacing is the mean gap between consecutive perpendicular offsets of
    the largest group (offsets measured along the group's common normal),
    and its angle is the group's circular mean.
    """
    if angle_tol_deg <= 0:
        raise ValueError("angle_tol_deg must be positive")
    pts = _as_array(cluster_centroids)
    result = dbscan(pts, eps, min_pts) if len(pts) else ClusterResult([], [])

    lines: list[FittedLine] = []
    for members in result.clusters:
        if len(members) < 2:
            continue
        sub = pts[members]
        if not (np.ptp(sub[:, 0]) > 0 or np.ptp(sub[:, 1]) > 0):
            continue
        ln = fit_line(sub)
        ln.inliers = list(members)
        lines.append(ln)

    if len(lines) < 2:
        return RebarPattern(lines=lines, mean_spacing_px=0.0, mean_angle_deg=0.0, parallel=False)

    # Union-find over pairwise angular closeness.
    parent = list(range(len(lines)))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            if angular_difference_deg(lines[i].angle_deg, lines[j].angle_deg) <= angle_tol_deg:
                ra, rb = find(i), find(j)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)

    groups: dict[int, list[int]] = {}
    for i in range(len(lines)):
        groups.setdefault(find(i), []).append(i)
    best = max(groups.values(), key=lambda g: (len(g), -min(g)))

    if len(best) < 2:
        return RebarPattern(lines=lines, mean_spacing_px=0.0, mean_angle_deg=0.0, parallel=False)

    mean_angle = _axial_mean_deg([lines[i].angle_deg for i in best])
    nx, ny = _normal(mean_angle)
    offsets = sorted(
        nx * lines[i].foot_point()[0] + ny * lines[i].foot_point()[1] for i in best
    )
    gaps = np.diff(np.asarray(offsets))
    spacing = float(gaps.mean()) if len(gaps) else 0.0
    return RebarPattern(
        lines=lines,
        mean_spacing_px=abs(spacing),
        mean_angle_deg=mean_angle,
        parallel=True,
        parallel_group=tuple(best),
    )
