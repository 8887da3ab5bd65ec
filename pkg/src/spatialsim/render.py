"""Top-down SVG debug view of a scene and, optionally, one trajectory."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET

from .nav_trace import Trajectory
from .scene_forge import Scene

SCALE = 60.0  # px per meter
PAD = 0.5     # meters around the scene


def simplify_polyline(points, tol: float = 1e-9) -> list:
    """Drop repeated points and interior points collinear with their neighbors."""
    out: list = []
    for p in points:
        if out and math.dist(out[-1], p) <= tol:
            continue
        if len(out) >= 2:
            (ax, ay), (bx, by) = out[-2], out[-1]
            cross = (bx - ax) * (p[1] - by) - (by - ay) * (p[0] - bx)
            dot = (bx - ax) * (p[0] - bx) + (by - ay) * (p[1] - by)
            if abs(cross) <= tol and dot >= 0:
                out[-1] = p
                continue
        out.append(p)
    return out


def render_topdown(scene: Scene, trajectory: Trajectory | None = None) -> str:
    b = scene.bounds()
    w, h = (b.width + 2 * PAD) * SCALE, (b.depth + 2 * PAD) * SCALE

    def X(x):
        return f"{(x - b.xmin + PAD) * SCALE:.2f}"

    def Y(y):  # flip so +y points up
        return f"{(b.ymax - y + PAD) * SCALE:.2f}"

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=f"{w:.0f}", height=f"{h:.0f}",
                     viewBox=f"0 0 {w:.2f} {h:.2f}")
    ET.SubElement(svg, "title").text = scene.id
    g_rooms = ET.SubElement(svg, "g", id="rooms")
    for r in scene.rooms:
        f = r.footprint
        ET.SubElement(g_rooms, "rect", {"class": "room", "data-room": str(r.id), "x": X(f.xmin), "y": Y(f.ymax),
                                        "width": f"{f.width * SCALE:.2f}", "height": f"{f.depth * SCALE:.2f}",
                                        "fill": "#f4f1ea", "stroke": "#333", "stroke-width": "2"})
        cx, cy = r.center
        ET.SubElement(g_rooms, "text", {"class": "room-label", "x": X(cx), "y": Y(cy), "font-size": "12",
                                        "text-anchor": "middle", "fill": "#999"}).text = f"{r.id} {r.kind}"
    g_doors = ET.SubElement(svg, "g", id="doors")
    for d in scene.doors:
        (x0, y0), (x1, y1) = d.segment
        ET.SubElement(g_doors, "line", {"class": "door", "x1": X(x0), "y1": Y(y0), "x2": X(x1), "y2": Y(y1),
                                        "stroke": "#2a9d8f", "stroke-width": "5"})
    g_obj = ET.SubElement(svg, "g", id="objects")
    for o in scene.objects:
        pts = " ".join(f"{X(x)},{Y(y)}" for x, y in o.box.corners2d())
        ET.SubElement(g_obj, "polygon", {"class": f"object {o.placement}", "data-object": str(o.id),
                                         "points": pts, "fill": "#e9c46a", "fill-opacity": "0.7",
                                         "stroke": "#6b4f1d"})
        cx, cy = o.box.center[0], o.box.center[1]
        ET.SubElement(g_obj, "text", {"class": "object-label", "x": X(cx), "y": Y(cy), "font-size": "9",
                                      "text-anchor": "middle"}).text = o.category
    if trajectory is not None:
        g_t = ET.SubElement(svg, "g", id="trajectory")
        pts = simplify_polyline([p.position for p in trajectory.poses])
        ET.SubElement(g_t, "polyline", {"class": "trajectory", "points": " ".join(f"{X(x)},{Y(y)}" for x, y in pts),
                                        "fill": "none", "stroke": "#e76f51", "stroke-width": "2"})
        for room, first, _last in trajectory.rotation_segments:
            x, y = trajectory.poses[first].position
            ET.SubElement(g_t, "circle", {"class": "rotation", "data-room": str(room), "cx": X(x), "cy": Y(y),
                                          "r": "7", "fill": "none", "stroke": "#e76f51"})
        x, y = trajectory.poses[0].position
        ET.SubElement(g_t, "circle", {"class": "start", "cx": X(x), "cy": Y(y), "r": "4", "fill": "#e76f51"})
    ET.indent(svg)
    return ET.tostring(svg, encoding="unicode") + "\n"
