"""Small geometric primitives shared by the generators.

Boxes are oriented only about the vertical axis, so most tests split into a
2D problem on the ground plane and a 1D interval problem along z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Vec2 = tuple[float, float]
Vec3 = tuple[float, float, float]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle on the ground plane."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def depth(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.depth

    @property
    def center(self) -> Vec2:
        return ((self.xmin + self.xmax) / 2, (self.ymin + self.ymax) / 2)

    def contains(self, x: float, y: float, tol: float = 1e-6) -> bool:
        return (self.xmin - tol <= x <= self.xmax + tol
                and self.ymin - tol <= y <= self.ymax + tol)

    def edges(self) -> list[tuple[Vec2, Vec2]]:
        a = (self.xmin, self.ymin)
        b = (self.xmax, self.ymin)
        c = (self.xmax, self.ymax)
        d = (self.xmin, self.ymax)
        return [(a, b), (b, c), (d, c), (a, d)]

    def to_list(self) -> list[float]:
        return [self.xmin, self.ymin, self.xmax, self.ymax]


@dataclass(frozen=True)
class Box:
    """Solid box: center, half-extents and yaw about +z (radians)."""

    center: Vec3
    half: Vec3
    yaw: float = 0.0

    @property
    def zmin(self) -> float:
        return self.center[2] - self.half[2]

    @property
    def zmax(self) -> float:
        return self.center[2] + self.half[2]

    def rotation2d(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s], [s, c]])

    def corners2d(self) -> np.ndarray:
        """Ground-projected corners, counterclockwise, shape (4, 2)."""
        hx, hy = self.half[0], self.half[1]
        local = np.array([[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]])
        return local @ self.rotation2d().T + np.array(self.center[:2])

    def to_local2d(self, pts: np.ndarray) -> np.ndarray:
        """World ground-plane points -> box frame (rows are points)."""
        return (np.asarray(pts, dtype=float) - np.array(self.center[:2])) @ self.rotation2d()


def interval_gap(a0: float, a1: float, b0: float, b1: float) -> float:
    """Distance between closed intervals [a0, a1] and [b0, b1]."""
    return max(0.0, b0 - a1, a0 - b1)


def interval_overlap(a0: float, a1: float, b0: float, b1: float) -> float:
    """Signed overlap length; negative means separated."""
    return min(a1, b1) - max(a0, b0)


def polygon_overlap_depth(p: np.ndarray, r: np.ndarray) -> float:
    """Minimum separating-axis penetration depth of two convex polygons.

    Positive means the interiors overlap by at least that much along every
    candidate axis; zero or negative means they touch or are separated.
    """
    depth = math.inf
    for poly in (p, r):
        n = len(poly)
        for i in range(n):
            e = poly[(i + 1) % n] - poly[i]
            axis = np.array([-e[1], e[0]])
            norm = math.hypot(axis[0], axis[1])
            if norm == 0:
                continue
            axis /= norm
            pa, ra = p @ axis, r @ axis
            depth = min(depth, interval_overlap(pa.min(), pa.max(), ra.min(), ra.max()))
    return depth


def boxes_interpenetrate(a: Box, b: Box, eps: float = 1e-4) -> bool:
    if interval_overlap(a.zmin, a.zmax, b.zmin, b.zmax) <= eps:
        return False
    return polygon_overlap_depth(a.corners2d(), b.corners2d()) > eps


def point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> float:
    px, py = p
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    ll = dx * dx + dy * dy
    t = 0.0 if ll == 0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / ll))
    return math.hypot(ax + t * dx - px, ay + t * dy - py)


def segments_cross(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2, eps: float = 1e-9) -> bool:
    """True if segment p0-p1 meets segment q0-q1 (touching counts)."""
    r = (p1[0] - p0[0], p1[1] - p0[1])
    s = (q1[0] - q0[0], q1[1] - q0[1])
    denom = r[0] * s[1] - r[1] * s[0]
    qp = (q0[0] - p0[0], q0[1] - p0[1])
    if abs(denom) < eps:
        # parallel: intersect only if collinear and overlapping
        if abs(qp[0] * r[1] - qp[1] * r[0]) > eps:
            return False
        rr = r[0] * r[0] + r[1] * r[1]
        if rr == 0:
            return point_segment_distance(p0, q0, q1) <= eps
        t0 = (qp[0] * r[0] + qp[1] * r[1]) / rr
        t1 = t0 + (s[0] * r[0] + s[1] * r[1]) / rr
        return max(min(t0, t1), 0.0) <= min(max(t0, t1), 1.0) + eps
    t = (qp[0] * s[1] - qp[1] * s[0]) / denom
    u = (qp[0] * r[1] - qp[1] * r[0]) / denom
    return -eps <= t <= 1 + eps and -eps <= u <= 1 + eps


def wrap_angle(a: float) -> float:
    """Wrap radians into (-pi, pi]."""
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi
