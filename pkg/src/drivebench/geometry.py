"""Planar geometry helpers: poses, polylines, arc-length parameterization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


class Polyline:
    """Arc-length parameterized 2D polyline.

    Points are (N, 2); consecutive points must be distinct.
    """

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("polyline needs >= 2 2D points")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(seg <= 1e-12):
            raise ValueError("consecutive polyline points must be distinct")
        self.points = pts
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def point_at(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.points) - 2)
        seg_len = self._cum[i + 1] - self._cum[i]
        t = (s - self._cum[i]) / seg_len
        return self.points[i] * (1.0 - t) + self.points[i + 1] * t

    def heading_at(self, s: float) -> float:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.points) - 2)
        d = self.points[i + 1] - self.points[i]
        return math.atan2(d[1], d[0])

    def offset_point(self, s: float, lateral: float) -> np.ndarray:
        """Point at arc-length s displaced laterally (positive = left)."""
        p = self.point_at(s)
        h = self.heading_at(s)
        return p + lateral * np.array([-math.sin(h), math.cos(h)])

    def project(self, xy) -> tuple[float, float]:
        """Project a point; returns (arc-length s, signed lateral offset).

        Lateral is positive to the left of travel direction.
        """
        p = np.asarray(xy, dtype=float)
        a = self.points[:-1]
        ab = np.diff(self.points, axis=0)
        seg_len2 = np.einsum("ij,ij->i", ab, ab)
        t = np.clip(np.einsum("ij,j->i", ab, p) - np.einsum("ij,ij->i", ab, a), 0.0, None)
        t = np.clip(t / seg_len2, 0.0, 1.0)
        q = a + t[:, None] * ab
        dq = p[None, :] - q
        d2 = np.einsum("ij,ij->i", dq, dq)
        i = int(np.argmin(d2))
        seg_len = math.sqrt(seg_len2[i])
        s = float(self._cum[i] + t[i] * seg_len)
        # signed lateral: cross(ab_hat, p - q), positive to the left
        lat = float((ab[i, 0] * dq[i, 1] - ab[i, 1] * dq[i, 0]) / seg_len)
        return s, lat

    def distance_to(self, xy) -> float:
        s, lat = self.project(xy)
        return abs(lat) if 0.0 < s < self.length else float(
            np.linalg.norm(np.asarray(xy, dtype=float) - self.point_at(s))
        )


def segments_intersect(p1, p2, q1, q2) -> bool:
    """True when segment p1-p2 crosses segment q1-q2 (inclusive of endpoints)."""
    p1, p2, q1, q2 = (np.asarray(v, dtype=float) for v in (p1, p2, q1, q2))

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(v) < 1e-12:
            return 0
        return 1 if v > 0 else -1

    def on_seg(a, b, c):
        return (
            min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
            and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12
        )

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


def oriented_box(cx: float, cy: float, heading: float, length: float, width: float) -> np.ndarray:
    """Corner points (4, 2) of an oriented rectangle centered at (cx, cy)."""
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = length / 2.0, width / 2.0
    local = np.array([[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([cx, cy])
