"""Metric and directional quantities the question types are built on."""

from __future__ import annotations

import math

from ..errors import DegenerateGeometry
from ..geometry import Box, interval_gap, point_segment_distance, polygon_overlap_depth

DIRECTION_BOUNDARIES = {
    "hard": (0.0, 90.0, -90.0, 180.0),
    "med": (0.0, 135.0, -135.0),
    "easy": (0.0, 180.0),
}


def _rect_distance(pa, pb) -> float:
    if polygon_overlap_depth(pa, pb) > 0:
        return 0.0
    best = math.inf
    for p, r in ((pa, pb), (pb, pa)):
        for v in p:
            for i in range(len(r)):
                best = min(best, point_segment_distance(tuple(v), tuple(r[i]), tuple(r[(i + 1) % len(r)])))
    return best


def closest_point_distance(a: Box, b: Box) -> float:
    """Minimum distance between two solid yaw-oriented boxes (0 if they meet).

    Both boxes are vertical prisms, so the squared distance splits into the
    ground-plane rectangle distance plus the vertical interval gap.
    """
    dz = interval_gap(a.zmin, a.zmax, b.zmin, b.zmax)
    dxy = _rect_distance(a.corners2d(), b.corners2d())
    return math.hypot(dxy, dz)


def point_box_distance(p, box: Box) -> float:
    dz = interval_gap(p[2], p[2], box.zmin, box.zmax)
    corners = box.corners2d()
    lx, ly = box.to_local2d([p[:2]])[0]
    if abs(lx) <= box.half[0] and abs(ly) <= box.half[1]:
        return dz
    dxy = min(point_segment_distance(tuple(p[:2]), tuple(corners[i]), tuple(corners[(i + 1) % 4]))
              for i in range(4))
    return math.hypot(dxy, dz)


def ego_frame_angle(positioning: Box, orienting: Box, querying: Box) -> float:
    """Signed angle (deg, (-180, 180]) from facing direction to the querying object.

    Positive is counterclockwise seen from above, i.e. to the left.
    """
    p = positioning.center[:2]
    o = orienting.center[:2]
    g = querying.center[:2]
    for u, v in ((p, o), (p, g), (o, g)):
        if math.dist(u, v) < 0.01:
            raise DegenerateGeometry("ground centroids coincide within 1 cm")
    fx, fy = o[0] - p[0], o[1] - p[1]
    qx, qy = g[0] - p[0], g[1] - p[1]
    ang = math.degrees(math.atan2(fx * qy - fy * qx, fx * qx + fy * qy))
    return 180.0 if ang <= -180.0 else ang


def classify_direction(angle: float, difficulty: str) -> str:
    if difficulty == "hard":
        if angle >= 0:
            return "front-left" if angle < 90 else "back-left"
        return "front-right" if angle > -90 else "back-right"
    if difficulty == "med":
        if abs(angle) >= 135:
            return "back"
        return "left" if angle > 0 else "right"
    if difficulty == "easy":
        return "left" if angle > 0 else "right"
    raise ValueError(f"unknown difficulty {difficulty!r}")


def boundary_distance(angle: float, difficulty: str) -> float:
    """Smallest circular distance (deg) from ``angle`` to a class boundary."""
    best = 360.0
    for b in DIRECTION_BOUNDARIES[difficulty]:
        d = abs((angle - b + 180.0) % 360.0 - 180.0)
        best = min(best, d)
    return best
