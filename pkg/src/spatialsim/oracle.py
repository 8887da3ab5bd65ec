"""Brute-force re-answering of generated items from raw scene and frame data.

Nothing here imports the question generators' geometry: box distances come
from bounded numerical minimization, areas from an exact raster over
compressed coordinates, directions from an explicit rotation into the ego
frame, and first appearances from a plain scan over observations.
"""

from __future__ import annotations

import itertools
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize

from .canonical import q
from .errors import UnresolvableProvenance
from .nav_trace import NavGrid, Trajectory, build_navgrid
from .observer import DenseAnnotations
from .qa.items import LETTERS, QAItem
from .scene_forge import Scene

TURN_STEPS = {"turn left": 1, "turn right": 3, "turn back": 2}
STEP = ((1, 0), (0, 1), (-1, 0), (0, -1))


# -- primitives -----------------------------------------------------------------


def _axes(box):
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    return np.array([[c * box.half[0], -s * box.half[1], 0.0],
                     [s * box.half[0], c * box.half[1], 0.0],
                     [0.0, 0.0, box.half[2]]])


def box_distance(a, b, samples: int = 64, seed: int = 0) -> float:
    """min |pa - pb| over both solids by L-BFGS-B on local box coordinates."""
    ma, mb = _axes(a), _axes(b)
    ca, cb = np.asarray(a.center, float), np.asarray(b.center, float)

    def f(x):
        d = ca + ma @ x[:3] - cb - mb @ x[3:]
        return float(d @ d), np.concatenate([2 * ma.T @ d, -2 * mb.T @ d])

    rng = np.random.default_rng(seed)
    cand = rng.uniform(-1, 1, size=(samples, 6))
    vals = [f(x)[0] for x in cand]
    x0 = cand[int(np.argmin(vals))]
    res = minimize(f, x0, jac=True, method="L-BFGS-B", bounds=[(-1, 1)] * 6,
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500})
    return math.sqrt(max(res.fun, 0.0))


def point_to_box(p, box) -> float:
    """Distance from a point to a solid box by clamping in the box frame."""
    dx, dy = p[0] - box.center[0], p[1] - box.center[1]
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    lx, ly, lz = c * dx + s * dy, -s * dx + c * dy, p[2] - box.center[2]
    ex = [max(abs(v) - h, 0.0) for v, h in zip((lx, ly, lz), box.half)]
    return math.sqrt(sum(e * e for e in ex))


def raster_area(rects) -> float:
    """Exact area of a union of axis-aligned rectangles on their own lattice."""
    xs = sorted({Fraction(v) for r in rects for v in (r.xmin, r.xmax)})
    ys = sorted({Fraction(v) for r in rects for v in (r.ymin, r.ymax)})
    total = Fraction(0)
    for x0, x1 in zip(xs, xs[1:]):
        for y0, y1 in zip(ys, ys[1:]):
            mx, my = (x0 + x1) / 2, (y0 + y1) / 2
            if any(Fraction(r.xmin) < mx < Fraction(r.xmax) and Fraction(r.ymin) < my < Fraction(r.ymax)
                   for r in rects):
                total += (x1 - x0) * (y1 - y0)
    return float(total)


def direction_label(p, o, g, difficulty: str) -> str:
    """Rotate the world so that p->o is +y, then read the label off signs."""
    fx, fy = o[0] - p[0], o[1] - p[1]
    n = math.hypot(fx, fy)
    fx, fy = fx / n, fy / n
    rot = np.array([[fy, -fx], [fx, fy]])  # rows: ego +x (right), ego +y (forward)
    x, y = rot @ np.array([g[0] - p[0], g[1] - p[1]])
    if difficulty == "hard":
        return ("front-" if y > 0 else "back-") + ("left" if x < 0 else "right")
    if difficulty == "med" and y <= -abs(x):
        return "back"
    return "left" if x < 0 else "right"


def sample_indices(n_total: int, n: int) -> list[int]:
    if n < 2:
        raise ValueError("n_frames must be >= 2")
    return [math.floor(i * (n_total - 1) / (n - 1)) for i in range(n)]


# -- the oracle -----------------------------------------------------------------


@dataclass
class _World:
    scene: Scene
    annotations: DenseAnnotations
    trajectory: Trajectory | None = None
    threshold: float | None = None
    _grid: NavGrid | None = None
    _dist: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.threshold is None:
            self.threshold = self.annotations.salience_area_fraction
        peak: dict[int, float] = defaultdict(float)
        first: dict[str, int] = {}
        cats = {o.id: o.category for o in self.scene.objects}
        for ob in self.annotations.observations:
            for oid, frac in ob.visible:
                peak[oid] = max(peak[oid], frac)
                if frac >= self.threshold and cats[oid] not in first:
                    first[cats[oid]] = ob.frame_index
        self.peak = dict(peak)
        self.first = first
        self.salient: dict[str, list] = defaultdict(list)
        for o in self.scene.objects:
            if self.peak.get(o.id, 0.0) >= self.threshold:
                self.salient[o.category].append(o)

    def instances(self, category: str):
        objs = self.salient.get(category)
        if not objs:
            raise UnresolvableProvenance(f"no salient {category!r} in {self.scene.id}")
        return objs

    def single(self, category: str):
        objs = self.instances(category)
        if len(objs) != 1:
            raise UnresolvableProvenance(f"{category!r} has {len(objs)} salient instances")
        return objs[0]

    def dist(self, a, b) -> float:
        key = (min(a.id, b.id), max(a.id, b.id))
        if key not in self._dist:
            self._dist[key] = box_distance(a.box, b.box, seed=key[0] * 1009 + key[1])
        return self._dist[key]

    @property
    def grid(self) -> NavGrid:
        if self._grid is None:
            self._grid = build_navgrid(self.scene)
        return self._grid


def _choice_block(question: str) -> list[str]:
    m = re.search(r"\(([^()]*)\) is the closest", question)
    if not m:
        raise UnresolvableProvenance("choice list not found in question")
    return m.group(1).split(", ")


def _argmin(dists: dict) -> str:
    return sorted(dists.items(), key=lambda kv: (kv[1], kv[0]))[0][0]


def _fmt1(v: float) -> str:
    return f"{q(v):.1f}"


def _footprint_gaps(grid: NavGrid, obj, reach: np.ndarray) -> dict:
    out = {}
    nx, ny = grid.shape
    for i in range(nx):
        for j in range(ny):
            if reach[i, j]:
                x, y = grid.center_of((i, j))
                out[(i, j)] = point_to_box((x, y, obj.box.center[2]), obj.box)
    return out


def _nearest_cell(gaps: dict, claimed) -> tuple[int, int]:
    """The claimed anchor cell if it is (up to float noise) nearest to the object."""
    best = min(gaps.values())
    claimed = tuple(claimed) if claimed is not None else None
    if claimed in gaps and gaps[claimed] <= best + 1e-6:
        return claimed
    return min(gaps, key=lambda c: (gaps[c], c))


def _replay(grid: NavGrid, cell, heading: int, actions, fills):
    it = iter(fills)
    for a in actions:
        if a == "[please fill in]":
            heading = (heading + TURN_STEPS[next(it)]) % 4
            continue
        for _ in range(round(float(re.search(r"[\d.]+", a).group()) / grid.cell)):
            nxt = (cell[0] + STEP[heading][0], cell[1] + STEP[heading][1])
            if not grid.can_move(cell, nxt):
                return None
            cell = nxt
    return cell


def _route_answer(w: _World, item: QAItem) -> str:
    p, m = item.provenance.params, item.provenance.metrics
    s, o, e = w.single(p["start_obj"]), w.single(p["orienting_obj"]), w.single(p["end_obj"])
    found = re.search(r"\.'\): (.*) You have reached the final destination\.$", item.question)
    if not found:
        raise UnresolvableProvenance("action list not found in route question")
    actions = [a.strip() for a in re.split(r"\s*\d+\. ", " " + found.group(1)) if a.strip()]
    g = w.grid
    cx, cy = w.scene.rooms[0].center
    reach = g.bfs(g.cell_of(cx, cy)) >= 0
    start = _nearest_cell(_footprint_gaps(g, s, reach), m.get("start_cell"))
    goal = _nearest_cell(_footprint_gaps(g, e, reach), m.get("goal_cell"))
    sx, sy = g.center_of(start)
    bearing = math.degrees(math.atan2(o.box.center[1] - sy, o.box.center[0] - sx)) % 360.0
    heading = int(((bearing + 45.0) % 360.0) // 90.0)
    blanks = actions.count("[please fill in]")
    hits = [", ".join(f) for f in itertools.product(TURN_STEPS, repeat=blanks)
            if _replay(g, start, heading, actions, f) == goal]
    return hits[0] if len(hits) == 1 else f"<{len(hits)} consistent fills>"


def _answer(w: _World, item: QAItem) -> str:
    qt, p = item.qtype, item.provenance.params
    if qt == "obj_count":
        w.instances(p["category"])
        return str(sum(o.category == p["category"] for o in w.scene.objects))
    if qt == "obj_size":
        obj = w.single(p["category"])
        return f"{q(max(2 * h for h in obj.box.half) * 100.0):.0f}"
    if qt == "room_size":
        rooms = sorted(set(w.trajectory.room_visit_order)) if w.trajectory is not None else p["room_ids"]
        by_id = {r.id: r for r in w.scene.rooms}
        try:
            return _fmt1(raster_area([by_id[r].footprint for r in rooms]))
        except KeyError as exc:
            raise UnresolvableProvenance(f"room {exc} missing") from None
    if qt == "abs_dist":
        return _fmt1(w.dist(w.single(p["object1"]), w.single(p["object2"])))
    if qt == "rel_dist":
        anchors = w.instances(p["category"])
        return _argmin({c: min(w.dist(a, b) for a in anchors for b in w.instances(c))
                        for c in _choice_block(item.question)})
    if qt.startswith("rel_dir_"):
        po = w.single(p["positioning_object"]).box.center
        oo = w.single(p["orienting_object"]).box.center
        qo = w.single(p["querying_object"]).box.center
        return direction_label(po, oo, qo, qt.rsplit("_", 1)[1])
    if qt == "appearance_order":
        cats = p["choices"]
        missing = [c for c in cats if c not in w.first]
        if missing:
            raise UnresolvableProvenance(f"never salient: {missing}")
        return ", ".join(sorted(cats, key=lambda c: (w.first[c], c)))
    if qt == "spatiotemporal_dist":
        last = w.annotations.observations[-1].pose
        eye = (last.position[0], last.position[1], last.eye_height)
        return _argmin({c: min(point_to_box(eye, o.box) for o in w.instances(c))
                        for c in _choice_block(item.question)})
    if qt == "route_plan":
        return _route_answer(w, item)
    raise UnresolvableProvenance(f"unknown qtype {qt}")


def _check_ids(item: QAItem, scene: Scene, annotations: DenseAnnotations) -> None:
    prov = item.provenance
    if prov.scene_id != scene.id or prov.trajectory_id != annotations.trajectory_id:
        raise UnresolvableProvenance(f"{item.id}: provenance points at {prov.scene_id}/{prov.trajectory_id}")
    known = {o.id for o in scene.objects}
    bad = [i for i in prov.object_ids if i not in known]
    if bad:
        raise UnresolvableProvenance(f"{item.id}: unknown object ids {bad}")


def oracle_answer(item: QAItem, scene: Scene, annotations: DenseAnnotations,
                  trajectory: Trajectory | None = None, _world: _World | None = None) -> str:
    _check_ids(item, scene, annotations)
    w = _world if _world is not None else _World(scene, annotations, trajectory)
    return _answer(w, item)


def subsample_check(item: QAItem, scene: Scene, trajectory: Trajectory | None,
                    annotations: DenseAnnotations, n_frames: int = 64) -> bool:
    """Is the item still answerable from uniformly sampled frames only?"""
    obs = annotations.observations
    keep = sorted(set(sample_indices(len(obs), n_frames)))
    sub = DenseAnnotations(annotations.scene_id, annotations.trajectory_id,
                           tuple(obs[i] for i in keep), {}, annotations.salience_area_fraction)
    w = _World(scene, sub, trajectory)
    if item.qtype not in ("appearance_order", "spatiotemporal_dist"):
        if any(w.peak.get(i, 0.0) < w.threshold for i in item.provenance.object_ids):
            return False
    try:
        return _answer(w, item) == item.answer
    except UnresolvableProvenance:
        return False


# -- reports ----------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationVerdict:
    item_id: str
    oracle_answer: str
    match: bool
    subsample_ok: bool | None = None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"item_id": self.item_id, "oracle_answer": self.oracle_answer, "match": self.match,
                "subsample_ok": self.subsample_ok, "notes": list(self.notes)}


def _mc_notes(item: QAItem) -> list[str]:
    if item.format != "multiple_choice":
        return []
    notes = []
    if item.choices is None or len(set(item.choices)) != 4:
        notes.append("choices not 4 distinct")
    elif item.correct_letter not in LETTERS or item.choices[LETTERS.index(item.correct_letter)] != item.answer:
        notes.append("answer differs from the lettered choice")
    return notes


def verify_item(item: QAItem, scene: Scene, annotations: DenseAnnotations,
                trajectory: Trajectory | None = None, n_frames: int | None = 64,
                world: _World | None = None) -> ValidationVerdict:
    try:
        ans = oracle_answer(item, scene, annotations, trajectory, world)
    except UnresolvableProvenance as exc:
        return ValidationVerdict(item.id, "", False, None, (f"UNRESOLVABLE_PROVENANCE: {exc}",))
    notes = _mc_notes(item)
    sub = None if n_frames is None else subsample_check(item, scene, trajectory, annotations, n_frames)
    return ValidationVerdict(item.id, ans, ans == item.answer and not notes, sub, tuple(notes))


def roundtrip_report(dataset, scenes: dict, annotations: dict, trajectories: dict | None = None,
                     n_frames: int | None = 64) -> dict:
    """Per-type match and subsample rates over ``dataset``.

    ``scenes`` maps scene id -> Scene, ``annotations`` and ``trajectories``
    map trajectory id -> DenseAnnotations / Trajectory.
    """
    trajectories = trajectories or {}
    worlds: dict[str, _World] = {}
    per_type: dict[str, dict] = defaultdict(lambda: {"items": 0, "matches": 0, "subsample_pass": 0})
    mismatches, missing = [], []
    for item in dataset:
        sid, tid = item.provenance.scene_id, item.provenance.trajectory_id
        if sid not in scenes or tid not in annotations:
            missing.append({"item_id": item.id, "scene_id": sid, "trajectory_id": tid})
            continue
        if tid not in worlds:
            worlds[tid] = _World(scenes[sid], annotations[tid], trajectories.get(tid))
        v = verify_item(item, scenes[sid], annotations[tid], trajectories.get(tid), n_frames, worlds[tid])
        row = per_type[item.qtype]
        row["items"] += 1
        row["matches"] += v.match
        row["subsample_pass"] += bool(v.subsample_ok)
        if not v.match:
            mismatches.append({"item_id": item.id, "stored": item.answer, **v.to_dict()})
    for row in per_type.values():
        row["match_rate"] = row["matches"] / row["items"]
        row["subsample_rate"] = row["subsample_pass"] / row["items"] if n_frames is not None else None
    total = sum(r["items"] for r in per_type.values())
    return {
        "items": total,
        "matches": sum(r["matches"] for r in per_type.values()),
        "per_type": dict(sorted(per_type.items())),
        "mismatches": mismatches,
        "missing": missing,
        "n_frames": n_frames,
        "ok": not mismatches and not missing,
    }


def exit_code(report: dict) -> int:
    if report["missing"]:
        return 3
    return 0 if report["ok"] else 2


__all__ = ["ValidationVerdict", "box_distance", "exit_code", "oracle_answer", "raster_area",
           "roundtrip_report", "sample_indices", "subsample_check", "verify_item"]
