"""Procedural indoor scenes: rectangular rooms, doors, and yaw-oriented boxes.

Layouts come from recursive guillotine subdivision of a bounding rectangle on a
coarse grid; doors are cut into shared walls along a random spanning tree of
the room adjacency graph; objects are drawn from a catalog and placed by
rejection sampling.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .canonical import dumps, q
from .errors import GenerationExhausted, UnknownRoom, UnreachableRoom
from .geometry import Box, Rect, boxes_interpenetrate, point_segment_distance, segments_cross

EXTERIOR = "EXTERIOR"
ROOM_KINDS = ("bedroom", "kitchen", "livingroom", "bathroom", "office", "hallway")
PLACEMENTS = ("floor", "on_surface", "wall_mounted")

# keep-out radii that keep every room center and door reachable
CENTER_CLEARANCE = 0.75
CORRIDOR_RADIUS = 0.6
WALL_GAP = 0.02


@dataclass(frozen=True)
class SceneParams:
    seed: int = 0
    room_count_range: tuple[int, int] = (3, 8)
    object_count_range: tuple[int, int] = (30, 50)
    room_edge_range: tuple[float, float] = (2.5, 7.0)
    cell: float = 0.5
    catalog_ref: str = "default"
    ceiling_height: float = 2.7
    door_width: float = 0.9
    max_per_category: int = 6
    retry_budget: int = 1000

    def validate(self) -> None:
        lo, hi = self.room_count_range
        if not (1 <= lo <= hi <= 32):
            raise ValueError(f"room_count_range {self.room_count_range} outside [1, 32]")
        olo, ohi = self.object_count_range
        if not (1 <= olo <= ohi):
            raise ValueError(f"bad object_count_range {self.object_count_range}")
        elo, ehi = self.room_edge_range
        if elo < 1.5 or ehi < elo:
            raise ValueError(f"bad room_edge_range {self.room_edge_range}")
        if self.cell <= 0 or self.ceiling_height <= 0:
            raise ValueError("cell and ceiling_height must be positive")
        if self.door_width < 0.8:
            raise ValueError("door_width must be at least 0.8 m")

    @classmethod
    def from_dict(cls, d: dict) -> "SceneParams":
        d = dict(d)
        for key in ("room_count_range", "object_count_range", "room_edge_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "room_count_range": list(self.room_count_range),
            "object_count_range": list(self.object_count_range),
            "room_edge_range": list(self.room_edge_range),
            "cell": self.cell,
            "catalog_ref": self.catalog_ref,
            "ceiling_height": self.ceiling_height,
            "door_width": self.door_width,
            "max_per_category": self.max_per_category,
            "retry_budget": self.retry_budget,
        }


@dataclass(frozen=True)
class Room:
    id: int
    footprint: Rect
    kind: str

    @property
    def center(self) -> tuple[float, float]:
        return self.footprint.center


@dataclass(frozen=True)
class Door:
    room_a: int
    room_b: int | str
    segment: tuple[tuple[float, float], tuple[float, float]]
    width: float

    @property
    def midpoint(self) -> tuple[float, float]:
        (x0, y0), (x1, y1) = self.segment
        return ((x0 + x1) / 2, (y0 + y1) / 2)


@dataclass(frozen=True)
class ObjectInstance:
    id: int
    category: str
    box: Box
    room_id: int
    placement: str


@dataclass(frozen=True)
class Scene:
    id: str
    rooms: tuple[Room, ...]
    doors: tuple[Door, ...]
    objects: tuple[ObjectInstance, ...]
    ceiling_height: float
    seed: int

    def room(self, room_id: int) -> Room:
        for r in self.rooms:
            if r.id == room_id:
                return r
        raise UnknownRoom(f"room {room_id} not in scene {self.id}")

    def object(self, object_id: int) -> ObjectInstance:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(object_id)

    def bounds(self) -> Rect:
        return Rect(
            min(r.footprint.xmin for r in self.rooms),
            min(r.footprint.ymin for r in self.rooms),
            max(r.footprint.xmax for r in self.rooms),
            max(r.footprint.ymax for r in self.rooms),
        )

    def category_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for o in self.objects:
            counts[o.category] = counts.get(o.category, 0) + 1
        return dict(sorted(counts.items()))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "seed": self.seed,
            "ceiling_height": self.ceiling_height,
            "rooms": [
                {"id": r.id, "kind": r.kind, "footprint": r.footprint.to_list(),
                 "center": list(r.center)}
                for r in self.rooms
            ],
            "doors": [
                {"room_a": d.room_a, "room_b": d.room_b,
                 "segment": [list(d.segment[0]), list(d.segment[1])], "width": d.width}
                for d in self.doors
            ],
            "objects": [
                {"id": o.id, "category": o.category, "center": list(o.box.center),
                 "half_extents": list(o.box.half), "yaw": o.box.yaw,
                 "room_id": o.room_id, "placement": o.placement}
                for o in self.objects
            ],
            "category_counts": self.category_counts(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        rooms = tuple(
            Room(int(r["id"]), Rect(*map(float, r["footprint"])), r["kind"]) for r in d["rooms"]
        )
        doors = tuple(
            Door(int(x["room_a"]), x["room_b"] if x["room_b"] == EXTERIOR else int(x["room_b"]),
                 (tuple(map(float, x["segment"][0])), tuple(map(float, x["segment"][1]))),
                 float(x["width"]))
            for x in d["doors"]
        )
        objects = tuple(
            ObjectInstance(
                int(o["id"]), o["category"],
                Box(tuple(map(float, o["center"])), tuple(map(float, o["half_extents"])),
                    float(o["yaw"])),
                int(o["room_id"]), o["placement"],
            )
            for o in d["objects"]
        )
        return cls(str(d["id"]), rooms, doors, objects, float(d["ceiling_height"]), int(d["seed"]))

    def dumps(self) -> str:
        return dumps(self.to_dict())


# -- catalog ---------------------------------------------------------------


@dataclass(frozen=True)
class CatalogEntry:
    category: str
    size_min: tuple[float, float, float]
    size_max: tuple[float, float, float]
    placements: tuple[str, ...]
    salience: float
    supports: bool = False


@dataclass(frozen=True)
class ObjectCatalog:
    entries: tuple[CatalogEntry, ...]

    def __post_init__(self):
        cats = [e.category for e in self.entries]
        if len(set(cats)) != len(cats):
            raise ValueError("duplicate catalog categories")
        for e in self.entries:
            if not all(0 < a < b for a, b in zip(e.size_min, e.size_max)):
                raise ValueError(f"bad extent range for {e.category}")
            if not e.placements or any(p not in PLACEMENTS for p in e.placements):
                raise ValueError(f"bad placements for {e.category}")


@functools.lru_cache(maxsize=8)
def load_catalog(ref: str = "default") -> ObjectCatalog:
    """Load a catalog by name ("default") or from a JSON file path."""
    if ref == "default":
        text = resources.files("spatialsim").joinpath("data/catalog.json").read_text("utf-8")
    else:
        text = Path(ref).read_text("utf-8")
    entries = tuple(
        CatalogEntry(e["category"], tuple(e["size_min"]), tuple(e["size_max"]),
                     tuple(e["placements"]), float(e["salience"]), bool(e.get("supports", False)))
        for e in json.loads(text)
    )
    return ObjectCatalog(entries)


# -- layout ----------------------------------------------------------------


def _snap(x: float, cell: float) -> float:
    return q(round(x / cell) * cell)


def _split(rect: Rect, k: int, rng: np.random.Generator, params: SceneParams) -> list[Rect]:
    if k == 1:
        return [rect]
    emin = params.room_edge_range[0]
    k1 = k // 2 if rng.random() < 0.5 else (k + 1) // 2
    frac = k1 / k + rng.uniform(-0.08, 0.08)
    if rect.width >= rect.depth:
        cut = _snap(rect.xmin + frac * rect.width, params.cell)
        cut = min(max(cut, rect.xmin + emin), rect.xmax - emin)
        a, b = Rect(rect.xmin, rect.ymin, cut, rect.ymax), Rect(cut, rect.ymin, rect.xmax, rect.ymax)
    else:
        cut = _snap(rect.ymin + frac * rect.depth, params.cell)
        cut = min(max(cut, rect.ymin + emin), rect.ymax - emin)
        a, b = Rect(rect.xmin, rect.ymin, rect.xmax, cut), Rect(rect.xmin, cut, rect.xmax, rect.ymax)
    return _split(a, k1, rng, params) + _split(b, k - k1, rng, params)


def _room_rects(rng: np.random.Generator, params: SceneParams, n: int) -> list[Rect] | None:
    emin, emax = params.room_edge_range
    if n == 1:
        w = _snap(rng.uniform(emin, emax), params.cell)
        h = _snap(rng.uniform(emin, emax), params.cell)
        w, h = min(max(w, emin), emax), min(max(h, emin), emax)
        return [Rect(0.0, 0.0, q(w), q(h))]
    lo = max(emin, min(3.0, emax))
    hi = max(lo, min(emax, 5.0))
    edge = rng.uniform(lo, hi)
    area = n * edge * edge
    aspect = rng.uniform(1.0, 1.5)
    w = max(_snap(math.sqrt(area * aspect), params.cell), emin)
    h = max(_snap(area / w, params.cell), emin)
    if rng.random() < 0.5:
        w, h = h, w
    rects = _split(Rect(0.0, 0.0, w, h), n, rng, params)
    for r in rects:
        if not (emin - 1e-9 <= r.width <= emax + 1e-9 and emin - 1e-9 <= r.depth <= emax + 1e-9):
            return None
        if r.area <= 2.0:
            return None
    return [Rect(q(r.xmin), q(r.ymin), q(r.xmax), q(r.ymax)) for r in rects]


def shared_wall(a: Rect, b: Rect, tol: float = 1e-6):
    """Shared boundary segment of two interior-disjoint rectangles, or None."""
    for ax, bx in ((a.xmax, b.xmin), (a.xmin, b.xmax)):
        if abs(ax - bx) < tol:
            lo, hi = max(a.ymin, b.ymin), min(a.ymax, b.ymax)
            if hi - lo > tol:
                return ((ax, lo), (ax, hi))
    for ay, by in ((a.ymax, b.ymin), (a.ymin, b.ymax)):
        if abs(ay - by) < tol:
            lo, hi = max(a.xmin, b.xmin), min(a.xmax, b.xmax)
            if hi - lo > tol:
                return ((lo, ay), (hi, ay))
    return None


def _door_on(seg, width: float, rng: np.random.Generator):
    (x0, y0), (x1, y1) = seg
    length = math.hypot(x1 - x0, y1 - y0)
    margin = 0.15
    if length < width + 2 * margin:
        return None
    t = rng.uniform(margin + width / 2, length - margin - width / 2)
    ux, uy = (x1 - x0) / length, (y1 - y0) / length
    cx, cy = x0 + ux * t, y0 + uy * t
    return ((q(cx - ux * width / 2), q(cy - uy * width / 2)),
            (q(cx + ux * width / 2), q(cy + uy * width / 2)))


def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def _doors(rng, params, rects: list[Rect]) -> list[Door] | None:
    n = len(rects)
    candidates = []
    for i in range(n):
        for j in range(i + 1, n):
            seg = shared_wall(rects[i], rects[j])
            if seg is not None:
                candidates.append((i, j, seg))
    order = rng.permutation(len(candidates))
    parent = list(range(n))
    doors = []
    for idx in order:
        i, j, seg = candidates[idx]
        ri, rj = _find(parent, i), _find(parent, j)
        if ri == rj and rng.random() > 0.25:
            continue
        door = _door_on(seg, params.door_width, rng)
        if door is None:
            continue
        parent[ri] = rj
        doors.append(Door(i, j, door, params.door_width))
    if len({_find(parent, i) for i in range(n)}) != 1:
        return None
    # one front door on an outer wall
    bounds = Rect(min(r.xmin for r in rects), min(r.ymin for r in rects),
                  max(r.xmax for r in rects), max(r.ymax for r in rects))
    outer = []
    for i, r in enumerate(rects):
        for seg in r.edges():
            (x0, y0), (x1, y1) = seg
            on_x = abs(x0 - x1) < 1e-9 and (abs(x0 - bounds.xmin) < 1e-9 or abs(x0 - bounds.xmax) < 1e-9)
            on_y = abs(y0 - y1) < 1e-9 and (abs(y0 - bounds.ymin) < 1e-9 or abs(y0 - bounds.ymax) < 1e-9)
            if on_x or on_y:
                outer.append((i, seg))
    if outer:
        i, seg = outer[int(rng.integers(len(outer)))]
        door = _door_on(seg, params.door_width, rng)
        if door is not None:
            doors.append(Door(i, EXTERIOR, door, params.door_width))
    doors.sort(key=lambda d: (d.room_a, -1 if d.room_b == EXTERIOR else d.room_b, d.segment))
    return doors


def _kinds(rng, rects: list[Rect]) -> list[str]:
    largest = max(range(len(rects)), key=lambda i: (rects[i].area, -i))
    kinds = []
    for i, r in enumerate(rects):
        if i == largest:
            kinds.append("livingroom")
        elif max(r.width, r.depth) >= 2.2 * min(r.width, r.depth):
            kinds.append("hallway")
        else:
            kinds.append(str(rng.choice(["bedroom", "kitchen", "bathroom", "office"])))
    return kinds


# -- object placement ------------------------------------------------------


def polygon_segment_distance(poly: np.ndarray, a, b) -> float:
    n = len(poly)
    for i in range(n):
        if segments_cross(tuple(poly[i]), tuple(poly[(i + 1) % n]), a, b):
            return 0.0
    if _point_in_convex(a, poly) or _point_in_convex(b, poly):
        return 0.0
    best = min(point_segment_distance(tuple(p), a, b) for p in poly)
    for i in range(n):
        p0, p1 = tuple(poly[i]), tuple(poly[(i + 1) % n])
        best = min(best, point_segment_distance(a, p0, p1), point_segment_distance(b, p0, p1))
    return best


def _point_in_convex(p, poly: np.ndarray) -> bool:
    n = len(poly)
    for i in range(n):
        e = poly[(i + 1) % n] - poly[i]
        w = np.asarray(p) - poly[i]
        if e[0] * w[1] - e[1] * w[0] < 0:
            return False
    return True


def _keepouts(room: Room, doors: list[Door]):
    c = room.center
    zones = [(c, c, CENTER_CLEARANCE)]
    for d in doors:
        if d.room_a == room.id or d.room_b == room.id:
            zones.append((c, d.midpoint, CORRIDOR_RADIUS))
    return zones


def _box_in_room(box: Box, rect: Rect, ceiling: float, inset: float = 0.0) -> bool:
    corners = box.corners2d()
    if corners[:, 0].min() < rect.xmin + inset - 1e-9 or corners[:, 0].max() > rect.xmax - inset + 1e-9:
        return False
    if corners[:, 1].min() < rect.ymin + inset - 1e-9 or corners[:, 1].max() > rect.ymax - inset + 1e-9:
        return False
    return box.zmin >= -1e-9 and box.zmax <= ceiling + 1e-9


def _wall_spans(room: Room, doors: list[Door]):
    """Room edges as (start, direction, length, inward normal, blocked intervals)."""
    r = room.footprint
    spans = []
    edges = [((r.xmin, r.ymin), (1.0, 0.0), r.width, (0.0, 1.0)),
             ((r.xmax, r.ymin), (0.0, 1.0), r.depth, (-1.0, 0.0)),
             ((r.xmax, r.ymax), (-1.0, 0.0), r.width, (0.0, -1.0)),
             ((r.xmin, r.ymax), (0.0, -1.0), r.depth, (1.0, 0.0))]
    for start, u, length, normal in edges:
        blocked = []
        for d in doors:
            if room.id not in (d.room_a, d.room_b):
                continue
            ts = []
            for p in d.segment:
                wx, wy = p[0] - start[0], p[1] - start[1]
                if abs(wx * normal[0] + wy * normal[1]) > 1e-6:
                    break
                ts.append(wx * u[0] + wy * u[1])
            else:
                blocked.append((min(ts), max(ts)))
        spans.append((start, u, length, normal, blocked))
    return spans


class _Placer:
    def __init__(self, rng, params: SceneParams, rooms: list[Room], doors: list[Door],
                 catalog: ObjectCatalog):
        self.rng = rng
        self.params = params
        self.rooms = rooms
        self.doors = doors
        self.catalog = catalog
        self.objects: list[ObjectInstance] = []
        self.counts: dict[str, int] = {}
        areas = np.array([r.footprint.area for r in rooms])
        self.room_p = areas / areas.sum()
        self.keepouts = {r.id: _keepouts(r, doors) for r in rooms}
        self.walls = {r.id: _wall_spans(r, doors) for r in rooms}

    def _pick_entry(self) -> CatalogEntry | None:
        avail = [e for e in self.catalog.entries
                 if self.counts.get(e.category, 0) < self.params.max_per_category]
        if not avail:
            return None
        w = np.array([e.salience for e in avail])
        return avail[int(self.rng.choice(len(avail), p=w / w.sum()))]

    def _dims(self, e: CatalogEntry):
        size = self.rng.uniform(e.size_min, e.size_max)
        return tuple(q(s / 2) for s in size)

    def _floor(self, e: CatalogEntry) -> tuple[Box, int] | None:
        room = self.rooms[int(self.rng.choice(len(self.rooms), p=self.room_p))]
        half = self._dims(e)
        yaw = float(self.rng.integers(4)) * math.pi / 2
        if self.rng.random() < 0.5:
            yaw += self.rng.uniform(-0.35, 0.35)
        yaw = q(math.atan2(math.sin(yaw), math.cos(yaw)))
        probe = Box((0.0, 0.0, half[2]), half, yaw).corners2d()
        ex, ey = np.abs(probe[:, 0]).max(), np.abs(probe[:, 1]).max()
        r = room.footprint
        m = WALL_GAP + 1e-3
        if r.width < 2 * (ex + m) or r.depth < 2 * (ey + m):
            return None
        cx = q(self.rng.uniform(r.xmin + ex + m, r.xmax - ex - m))
        cy = q(self.rng.uniform(r.ymin + ey + m, r.ymax - ey - m))
        box = Box((cx, cy, half[2]), half, yaw)
        poly = box.corners2d()
        for a, b, rad in self.keepouts[room.id]:
            if polygon_segment_distance(poly, a, b) < rad:
                return None
        return box, room.id

    def _wall(self, e: CatalogEntry) -> tuple[Box, int] | None:
        room = self.rooms[int(self.rng.choice(len(self.rooms), p=self.room_p))]
        start, u, length, normal, blocked = self.walls[room.id][int(self.rng.integers(4))]
        half = self._dims(e)
        hx, hy, hz = half
        margin = 0.1
        if length < 2 * (hx + margin):
            return None
        t = self.rng.uniform(hx + margin, length - hx - margin)
        for lo, hi in blocked:
            if t + hx > lo - margin and t - hx < hi + margin:
                return None
        ceiling = self.params.ceiling_height
        zlo, zhi = 1.0, min(1.7, ceiling - 0.05 - 2 * hz)
        if zhi < zlo:
            if 2 * hz > ceiling - 0.1:
                return None
            zlo = zhi = max(0.05, ceiling - 0.05 - 2 * hz)
        bottom = self.rng.uniform(zlo, zhi)
        off = WALL_GAP + hy
        cx = q(start[0] + u[0] * t + normal[0] * off)
        cy = q(start[1] + u[1] * t + normal[1] * off)
        yaw = q(math.atan2(u[1], u[0]))
        return Box((cx, cy, q(bottom + hz)), half, yaw), room.id

    def _surface(self, e: CatalogEntry) -> tuple[Box, int] | None:
        supporters = [o for o in self.objects if o.placement == "floor"
                      and self.catalog_entry(o.category).supports]
        if not supporters:
            return None
        s = supporters[int(self.rng.integers(len(supporters)))]
        half = self._dims(e)
        turn = self.rng.random() < 0.5
        hx, hy = (half[1], half[0]) if turn else (half[0], half[1])
        sx, sy = s.box.half[0] - 0.01, s.box.half[1] - 0.01
        if hx > sx or hy > sy:
            return None
        lx, ly = self.rng.uniform(-(sx - hx), sx - hx), self.rng.uniform(-(sy - hy), sy - hy)
        c, sn = math.cos(s.box.yaw), math.sin(s.box.yaw)
        cx = q(s.box.center[0] + c * lx - sn * ly)
        cy = q(s.box.center[1] + sn * lx + c * ly)
        yaw = s.box.yaw + (math.pi / 2 if turn else 0.0)
        yaw = q(math.atan2(math.sin(yaw), math.cos(yaw)))
        top = s.box.center[2] + s.box.half[2]
        return Box((cx, cy, q(top + half[2])), half, yaw), s.room_id

    @functools.cached_property
    def _entries(self) -> dict[str, CatalogEntry]:
        return {e.category: e for e in self.catalog.entries}

    def catalog_entry(self, category: str) -> CatalogEntry:
        return self._entries[category]

    def place_one(self) -> None:
        budget = self.params.retry_budget
        for _ in range(budget):
            e = self._pick_entry()
            if e is None:
                break
            placement = str(self.rng.choice(list(e.placements)))
            proposal = {"floor": self._floor, "wall_mounted": self._wall,
                        "on_surface": self._surface}[placement](e)
            if proposal is None:
                continue
            box, room_id = proposal
            room = self.rooms[room_id]
            if not _box_in_room(box, room.footprint, self.params.ceiling_height, inset=0.01):
                continue
            if any(boxes_interpenetrate(box, o.box) for o in self.objects):
                continue
            self.objects.append(ObjectInstance(len(self.objects), e.category, box, room_id, placement))
            self.counts[e.category] = self.counts.get(e.category, 0) + 1
            return
        raise GenerationExhausted(
            f"object {len(self.objects)}: no valid placement after {budget} attempts")


def generate_scene(params: SceneParams) -> Scene:
    """Generate a scene deterministically from ``params`` (seed included)."""
    params.validate()
    catalog = load_catalog(params.catalog_ref)
    rng = np.random.default_rng(params.seed)
    n_rooms = int(rng.integers(params.room_count_range[0], params.room_count_range[1] + 1))
    for _ in range(params.retry_budget):
        rects = _room_rects(rng, params, n_rooms)
        if rects is None:
            continue
        doors = _doors(rng, params, rects)
        if doors is not None:
            break
    else:
        raise GenerationExhausted(f"no valid {n_rooms}-room layout within budget")
    rooms = [Room(i, r, k) for i, (r, k) in enumerate(zip(rects, _kinds(rng, rects)))]
    n_objects = int(rng.integers(params.object_count_range[0], params.object_count_range[1] + 1))

    from .nav_trace import build_navgrid  # local: nav_trace depends on this module

    for _ in range(20):
        placer = _Placer(rng, params, rooms, doors, catalog)
        for _ in range(n_objects):
            placer.place_one()
        scene = Scene(f"scene_{params.seed}", tuple(rooms), tuple(doors), tuple(placer.objects),
                      params.ceiling_height, params.seed)
        try:
            build_navgrid(scene)
        except UnreachableRoom:
            continue
        return scene
    raise GenerationExhausted("object placement keeps disconnecting rooms")


def floor_area(scene: Scene, room_ids) -> float:
    """Total footprint area (m^2) of the listed rooms."""
    room_ids = set(room_ids)
    if not room_ids:
        raise UnknownRoom("room_ids must be nonempty")
    return sum(scene.room(i).footprint.area for i in sorted(room_ids))


def wall_segments(scene: Scene) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    """Solid wall pieces: merged room boundaries with door openings removed."""
    lines: dict[tuple[str, float], list[tuple[float, float]]] = {}
    for r in scene.rooms:
        f = r.footprint
        lines.setdefault(("y", f.ymin), []).append((f.xmin, f.xmax))
        lines.setdefault(("y", f.ymax), []).append((f.xmin, f.xmax))
        lines.setdefault(("x", f.xmin), []).append((f.ymin, f.ymax))
        lines.setdefault(("x", f.xmax), []).append((f.ymin, f.ymax))
    openings: dict[tuple[str, float], list[tuple[float, float]]] = {}
    for d in scene.doors:
        (x0, y0), (x1, y1) = d.segment
        if abs(y0 - y1) < 1e-9:
            openings.setdefault(("y", y0), []).append((min(x0, x1), max(x0, x1)))
        else:
            openings.setdefault(("x", x0), []).append((min(y0, y1), max(y0, y1)))
    segs = []
    for key in sorted(lines):
        axis, c = key
        merged: list[list[float]] = []
        for lo, hi in sorted(lines[key]):
            if merged and lo <= merged[-1][1] + 1e-9:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        holes = sorted(v for k, vs in openings.items()
                       if k[0] == axis and abs(k[1] - c) < 1e-9 for v in vs)
        pieces = []
        for lo, hi in merged:
            cur = lo
            for hlo, hhi in holes:
                if hhi <= cur or hlo >= hi:
                    continue
                if hlo > cur + 1e-9:
                    pieces.append((cur, hlo))
                cur = max(cur, hhi)
            if hi > cur + 1e-9:
                pieces.append((cur, hi))
        for lo, hi in pieces:
            segs.append(((lo, c), (hi, c)) if axis == "y" else ((c, lo), (c, hi)))
    return segs


# -- validation ------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def codes(self) -> set[str]:
        return {i.code for i in self.issues}

    def add(self, code: str, message: str) -> None:
        self.issues.append(Issue(code, message))


def _door_on_boundary(d: Door, a: Rect, b: Rect | None) -> bool:
    (x0, y0), (x1, y1) = d.segment
    if b is None:
        return any(
            point_segment_distance((x0, y0), *e) < 1e-6 and point_segment_distance((x1, y1), *e) < 1e-6
            for e in a.edges()
        )
    seg = shared_wall(a, b)
    if seg is None:
        return False
    return (point_segment_distance((x0, y0), *seg) < 1e-6
            and point_segment_distance((x1, y1), *seg) < 1e-6)


def validate_scene(scene: Scene, params: SceneParams | None = None) -> ValidationReport:
    """List every violated scene invariant; an empty report means valid."""
    rep = ValidationReport()
    ids = [r.id for r in scene.rooms]
    if len(set(ids)) != len(ids):
        rep.add("DUPLICATE_ROOM_ID", "room ids are not unique")
    rooms = {r.id: r for r in scene.rooms}
    if params is not None:
        lo, hi = params.room_count_range
        if not lo <= len(scene.rooms) <= hi:
            rep.add("ROOM_COUNT", f"{len(scene.rooms)} rooms outside [{lo}, {hi}]")
        lo, hi = params.object_count_range
        if not lo <= len(scene.objects) <= hi:
            rep.add("OBJECT_COUNT", f"{len(scene.objects)} objects outside [{lo}, {hi}]")
    for r in scene.rooms:
        if r.kind not in ROOM_KINDS:
            rep.add("ROOM_KIND", f"room {r.id} has unknown kind {r.kind!r}")
        if r.footprint.area <= 2.0 or r.footprint.width <= 0 or r.footprint.depth <= 0:
            rep.add("ROOM_AREA", f"room {r.id} footprint area {r.footprint.area:.3f} <= 2")
    for i, a in enumerate(scene.rooms):
        for b in scene.rooms[i + 1:]:
            fa, fb = a.footprint, b.footprint
            ox = min(fa.xmax, fb.xmax) - max(fa.xmin, fb.xmin)
            oy = min(fa.ymax, fb.ymax) - max(fa.ymin, fb.ymin)
            if ox > 1e-6 and oy > 1e-6:
                rep.add("ROOM_OVERLAP", f"rooms {a.id} and {b.id} overlap")
    parent = {i: i for i in rooms}
    for d in scene.doors:
        if d.width < 0.8 - 1e-9:
            rep.add("DOOR_WIDTH", f"door {d.room_a}-{d.room_b} narrower than 0.8 m")
        if d.room_a not in rooms or (d.room_b != EXTERIOR and d.room_b not in rooms):
            rep.add("DOOR_ROOM", f"door references unknown room {d.room_a}-{d.room_b}")
            continue
        other = None if d.room_b == EXTERIOR else rooms[d.room_b].footprint
        if not _door_on_boundary(d, rooms[d.room_a].footprint, other):
            rep.add("DOOR_PLACEMENT", f"door {d.room_a}-{d.room_b} not on a shared wall")
            continue
        if d.room_b != EXTERIOR:
            ra, rb = _find(parent, d.room_a), _find(parent, d.room_b)
            parent[ra] = rb
    if rooms and len({_find(parent, i) for i in rooms}) != 1:
        rep.add("ROOM_CONNECTIVITY", "room adjacency graph through doors is disconnected")
    oids = [o.id for o in scene.objects]
    if len(set(oids)) != len(oids):
        rep.add("DUPLICATE_OBJECT_ID", "object ids are not unique")
    for o in scene.objects:
        if o.placement not in PLACEMENTS:
            rep.add("PLACEMENT", f"object {o.id} has unknown placement {o.placement!r}")
        if min(o.box.half) <= 0:
            rep.add("HALF_EXTENTS", f"object {o.id} has non-positive half-extents")
        if o.room_id not in rooms:
            rep.add("OBJECT_ROOM", f"object {o.id} references unknown room {o.room_id}")
            continue
        if not _box_in_room(o.box, rooms[o.room_id].footprint, scene.ceiling_height):
            rep.add("CONTAINMENT", f"object {o.id} ({o.category}) leaves room {o.room_id}")
    for i, a in enumerate(scene.objects):
        for b in scene.objects[i + 1:]:
            if boxes_interpenetrate(a.box, b.box):
                rep.add("INTERPENETRATION", f"objects {a.id} and {b.id} interpenetrate")
    for cat, n in scene.category_counts().items():
        cap = params.max_per_category if params is not None else 6
        if n > cap:
            rep.add("CATEGORY_CAP", f"{n} instances of {cat!r} exceed cap {cap}")
    return rep
