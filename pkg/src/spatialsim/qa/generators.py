"""Candidate generation for every question type, one trajectory at a time."""

from __future__ import annotations

import itertools
import math
import zlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..canonical import q
from ..errors import NoPath
from ..nav_trace import NavGrid, Trajectory, build_navgrid
from ..observer import DenseAnnotations
from ..scene_forge import Scene, floor_area
from .gates import QualityConfig, quality_gate
from .geometry import classify_direction, closest_point_distance, ego_frame_angle, point_box_distance
from .items import DIRECTION_TYPES, QTYPES, Provenance, QAItem, format_answer
from .templates import FILL_BLANK, TURNS, choice_params, render

HEADINGS = ((1, 0), (0, 1), (-1, 0), (0, -1))  # east, north, west, south; +1 index = left turn


def stable_seed(*parts) -> list[int]:
    """Seed sequence from ints and strings, independent of PYTHONHASHSEED."""
    return [p if isinstance(p, int) else zlib.crc32(str(p).encode()) for p in parts]


def salient_objects(scene: Scene, annotations: DenseAnnotations, cfg: QualityConfig = QualityConfig()) -> list[int]:
    best = annotations.max_fraction()
    return sorted(oid for oid, f in best.items() if f >= cfg.min_salient_area)


@dataclass
class Rejection:
    trajectory_id: str
    qtype: str
    reason: str
    params: dict

    def to_dict(self) -> dict:
        return {"trajectory_id": self.trajectory_id, "qtype": self.qtype,
                "reason": self.reason, "params": self.params}


@dataclass
class _Context:
    scene: Scene
    trajectory: Trajectory
    annotations: DenseAnnotations
    cfg: QualityConfig
    grid: NavGrid | None = None
    max_area: dict = field(init=False)
    salient: dict = field(init=False)       # category -> salient object ids
    _dist: dict = field(init=False, default_factory=dict)

    def __post_init__(self):
        self.max_area = self.annotations.max_fraction()
        self.salient = defaultdict(list)
        for oid in salient_objects(self.scene, self.annotations, self.cfg):
            self.salient[self.scene.object(oid).category].append(oid)
        self.salient = dict(sorted(self.salient.items()))

    @property
    def categories(self) -> list[str]:
        return list(self.salient)

    @property
    def unique(self) -> list[str]:
        return [c for c, ids in self.salient.items() if len(ids) == 1]

    def only(self, category: str):
        return self.scene.object(self.salient[category][0])

    def dist(self, a: int, b: int) -> float:
        key = (a, b) if a < b else (b, a)
        if key not in self._dist:
            self._dist[key] = closest_point_distance(self.scene.object(a).box, self.scene.object(b).box)
        return self._dist[key]

    def category_dist(self, c1: str, c2: str) -> float:
        return min(self.dist(a, b) for a in self.salient[c1] for b in self.salient[c2])

    def base_metrics(self, ids, categories) -> dict:
        return {"min_area": q(min(self.max_area.get(i, 0.0) for i in ids)) if ids else 0.0,
                "salient_counts": {c: len(self.salient.get(c, [])) for c in categories}}

    def provenance(self, ids, value, params, metrics) -> Provenance:
        return Provenance(self.scene.id, self.trajectory.id, tuple(sorted(set(ids))), value, params, metrics)


class _Collector:
    """Runs candidates through the gate and keeps accepted ones up to the cap."""

    def __init__(self, ctx: _Context, qtype: str):
        self.ctx, self.qtype = ctx, qtype
        self.accepted: list[QAItem] = []
        self.rejected: list[Rejection] = []
        self.cap = ctx.cfg.max_questions_per_type_per_trajectory

    @property
    def full(self) -> bool:
        return len(self.accepted) >= self.cap

    def offer(self, question: str, answer: str, prov: Provenance) -> bool:
        k = len(self.accepted)
        item = QAItem(f"{self.ctx.trajectory.id}:{self.qtype}:{k:02d}:oe", self.qtype, "open_ended",
                      question, answer, prov)
        res = quality_gate(item, self.ctx.cfg)
        if res.accepted:
            self.accepted.append(item)
        else:
            self.reject(res.reason, prov.params)
        return res.accepted

    def reject(self, reason: str, params: dict) -> None:
        self.rejected.append(Rejection(self.ctx.trajectory.id, self.qtype, reason, params))


def _attempts(ctx: _Context) -> int:
    return ctx.cfg.max_questions_per_type_per_trajectory * ctx.cfg.attempts_per_slot


def _draw(rng, pool: list, k: int, tries: int):
    """Distinct random ordered k-tuples from ``pool`` (no repeats across draws)."""
    if len(pool) < k:
        return
    total = math.perm(len(pool), k)
    if total <= tries:
        combos = list(itertools.permutations(pool, k))
        for i in rng.permutation(len(combos)):
            yield combos[i]
        return
    seen = set()
    for _ in range(tries * 3):
        pick = tuple(pool[i] for i in rng.choice(len(pool), size=k, replace=False))
        if pick in seen:
            continue
        seen.add(pick)
        yield pick
        if len(seen) >= tries:
            return


# -- per-type generators ---------------------------------------------------------


def gen_object_count(ctx: _Context, rng) -> _Collector:
    col = _Collector(ctx, "obj_count")
    counts = ctx.scene.category_counts()
    cats = ctx.categories
    for i in rng.permutation(len(cats)):
        if col.full:
            break
        c = cats[i]
        n = counts[c]
        ids = ctx.salient[c]
        col.offer(render("obj_count", category=c), format_answer("obj_count", n),
                  ctx.provenance(ids, n, {"category": c}, ctx.base_metrics(ids, [])))
    return col


def gen_object_size(ctx: _Context, rng) -> _Collector:
    col = _Collector(ctx, "obj_size")
    cats = ctx.categories
    for i in rng.permutation(len(cats)):
        if col.full:
            break
        c = cats[i]
        ids = ctx.salient[c]
        if len(ids) != 1:
            col.reject("AMBIGUOUS_CATEGORY", {"category": c})
            continue
        obj = ctx.scene.object(ids[0])
        value = q(max(2 * h for h in obj.box.half) * 100.0)
        col.offer(render("obj_size", category=c), format_answer("obj_size", value),
                  ctx.provenance(ids, value, {"category": c}, ctx.base_metrics(ids, [c])))
    return col


def gen_room_size(ctx: _Context, rng) -> _Collector:
    col = _Collector(ctx, "room_size")
    rooms = sorted(set(ctx.trajectory.room_visit_order))
    value = q(floor_area(ctx.scene, rooms))
    metrics = {"min_area": 1.0, "salient_counts": {}}
    col.offer(render("room_size"), format_answer("room_size", value),
              ctx.provenance([], value, {"room_ids": rooms}, metrics))
    return col


def gen_abs_distance(ctx: _Context, rng) -> _Collector:
    col = _Collector(ctx, "abs_dist")
    pool = ctx.unique
    for c1, c2 in _draw(rng, pool, 2, _attempts(ctx)):
        if col.full:
            break
        a, b = ctx.only(c1), ctx.only(c2)
        d = q(ctx.dist(a.id, b.id))
        metrics = ctx.base_metrics([a.id, b.id], [c1, c2])
        metrics["pair_distances"] = [d]
        col.offer(render("abs_dist", object1=c1, object2=c2), format_answer("abs_dist", d),
                  ctx.provenance([a.id, b.id], d, {"object1": c1, "object2": c2}, metrics))
    return col


def _nearest_choice(distances: dict) -> str:
    return min(distances, key=lambda c: (distances[c], c))


def gen_rel_distance(ctx: _Context, rng) -> _Collector:
    col = _Collector(ctx, "rel_dist")
    cats = ctx.categories
    for pick in _draw(rng, cats, 5, _attempts(ctx)):
        if col.full:
            break
        anchor, choices = pick[0], list(pick[1:])
        dists = {c: ctx.category_dist(anchor, c) for c in choices}
        ids = [i for c in pick for i in ctx.salient[c]]
        metrics = ctx.base_metrics(ids, list(pick))
        metrics["distances"] = {c: q(d) for c, d in dists.items()}
        ans = _nearest_choice(dists)
        params = {"category": anchor, "choices": choices}
        col.offer(render("rel_dist", category=anchor, **choice_params(choices)), ans,
                  ctx.provenance(ids, ans, params, metrics))
    return col


def gen_rel_direction(ctx: _Context, rng, difficulty: str) -> _Collector:
    qtype = f"rel_dir_{difficulty}"
    col = _Collector(ctx, qtype)
    for cp, co, cq in _draw(rng, ctx.unique, 3, _attempts(ctx)):
        if col.full:
            break
        p, o, g = ctx.only(cp), ctx.only(co), ctx.only(cq)
        params = {"positioning_object": cp, "orienting_object": co, "querying_object": cq}
        metrics = ctx.base_metrics([p.id, o.id, g.id], [cp, co, cq])
        pairs = [ctx.dist(p.id, o.id), ctx.dist(p.id, g.id), ctx.dist(o.id, g.id)]
        metrics["pair_distances"] = [q(d) for d in pairs]
        if min(pairs) < ctx.cfg.min_pair_distance:
            col.reject("PAIR_TOO_CLOSE", params)
            continue
        angle = ego_frame_angle(p.box, o.box, g.box)
        metrics["angle"] = q(angle)
        label = classify_direction(angle, difficulty)
        col.offer(render(qtype, **params), label, ctx.provenance([p.id, o.id, g.id], label, params, metrics))
    return col


def gen_appearance_order(ctx: _Context, rng) -> _Collector:
    col = _Collector(ctx, "appearance_order")
    first = ctx.annotations.first_appearance
    cats = [c for c in ctx.categories if c in first]
    for pick in _draw(rng, cats, 4, _attempts(ctx)):
        if col.full:
            break
        choices = list(pick)
        ids = [i for c in choices for i in ctx.salient[c]]
        metrics = ctx.base_metrics(ids, choices)
        metrics["first_frames"] = {c: first[c] for c in choices}
        ans = ", ".join(sorted(choices, key=lambda c: (first[c], c)))
        col.offer(render("appearance_order", **choice_params(choices)), ans,
                  ctx.provenance(ids, ans, {"choices": choices}, metrics))
    return col


def gen_spatiotemporal_distance(ctx: _Context, rng) -> _Collector:
    col = _Collector(ctx, "spatiotemporal_dist")
    eye = ctx.trajectory.poses[-1].eye
    near = {c: min(point_box_distance(eye, ctx.scene.object(i).box) for i in ids)
            for c, ids in ctx.salient.items()}
    for pick in _draw(rng, ctx.categories, 4, _attempts(ctx)):
        if col.full:
            break
        choices = list(pick)
        dists = {c: near[c] for c in choices}
        ids = [i for c in choices for i in ctx.salient[c]]
        metrics = ctx.base_metrics(ids, choices)
        metrics["distances"] = {c: q(d) for c, d in dists.items()}
        metrics["ego_position"] = [q(v) for v in eye]
        ans = _nearest_choice(dists)
        col.offer(render("spatiotemporal_dist", **choice_params(choices)), ans,
                  ctx.provenance(ids, ans, {"choices": choices}, metrics))
    return col


# -- route planning --------------------------------------------------------------


class _RoutePlanner:
    """Turn-minimizing shortest paths on the navigation grid."""

    def __init__(self, scene: Scene, grid: NavGrid):
        self.scene, self.grid = scene, grid
        cx, cy = scene.rooms[0].center
        self.reach = grid.bfs(grid.cell_of(cx, cy)) >= 0
        nx, ny = grid.shape
        ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        self.cx = grid.origin[0] + (ii + 0.5) * grid.cell
        self.cy = grid.origin[1] + (jj + 0.5) * grid.cell

    def anchor_cell(self, obj) -> tuple[int, int]:
        """Reachable free cell whose center is closest to the object's footprint."""
        pts = np.stack([self.cx.ravel(), self.cy.ravel()], axis=1)
        local = obj.box.to_local2d(pts)
        hx, hy = obj.box.half[0], obj.box.half[1]
        gap = np.hypot(np.maximum(np.abs(local[:, 0]) - hx, 0), np.maximum(np.abs(local[:, 1]) - hy, 0))
        gap = np.where(self.reach.ravel(), gap, np.inf)
        k = int(np.argmin(gap))  # first minimum = lexicographically first cell
        return divmod(k, self.grid.shape[1])

    def plan(self, start, goal, heading: int):
        """Shortest path start->goal minimizing turns; returns list of (heading, cells)."""
        g = self.grid
        dist = g.bfs(goal)
        if dist[start] < 0:
            raise NoPath(f"no path from {start} to {goal}")
        memo: dict = {}

        def best(c, h):
            if c == goal:
                return 0, None
            key = (c, h)
            if key in memo:
                return memo[key]
            want = dist[c] - 1
            out = None
            for order in [h] + [d for d in range(4) if d != h]:
                dx, dy = HEADINGS[order]
                n = (c[0] + dx, c[1] + dy)
                if g.in_bounds(n) and dist[n] == want and g.can_move(c, n):
                    cost = best(n, order)[0] + (order != h)
                    if out is None or cost < out[0]:
                        out = (cost, order)
            memo[key] = out
            return out

        segments: list[list] = []
        c, h = start, heading
        while c != goal:
            _, d = best(c, h)
            if not segments or segments[-1][0] != d:
                segments.append([d, 0])
            segments[-1][1] += 1
            c = (c[0] + HEADINGS[d][0], c[1] + HEADINGS[d][1])
            h = d
        return segments


def turn_name(h_from: int, h_to: int) -> str:
    return {1: "turn left", 3: "turn right", 2: "turn back"}[(h_to - h_from) % 4]


def route_actions(segments, heading: int, cell: float):
    """Action strings with blanks at each heading change, and the true fills."""
    actions, fills = [], []
    h = heading
    for d, n in segments:
        if d != h:
            actions.append(FILL_BLANK)
            fills.append(turn_name(h, d))
            h = d
        actions.append(f"Go forward {n * cell:.2f} meters.")
    text = " ".join(f"{i + 1}. {a}" for i, a in enumerate(actions))
    return actions, fills, text


def replay_fills(grid: NavGrid, start, heading: int, actions, fills) -> tuple[int, int] | None:
    """Walk the actions with the given fills; None on an illegal move."""
    c, h = start, heading
    it = iter(fills)
    for a in actions:
        if a == FILL_BLANK:
            h = (h + {"turn left": 1, "turn right": 3, "turn back": 2}[next(it)]) % 4
            continue
        n = round(float(a.split()[2]) / grid.cell)
        for _ in range(n):
            nxt = (c[0] + HEADINGS[h][0], c[1] + HEADINGS[h][1])
            if not grid.can_move(c, nxt):
                return None
            c = nxt
    return c


def gen_route_plan(ctx: _Context, rng) -> _Collector:
    col = _Collector(ctx, "route_plan")
    cfg = ctx.cfg
    grid = ctx.grid if ctx.grid is not None else build_navgrid(ctx.scene)
    planner = _RoutePlanner(ctx.scene, grid)
    for cs, co, ce in _draw(rng, ctx.unique, 3, _attempts(ctx)):
        if col.full:
            break
        s, o, e = ctx.only(cs), ctx.only(co), ctx.only(ce)
        params = {"start_obj": cs, "orienting_obj": co, "end_obj": ce}
        metrics = ctx.base_metrics([s.id, o.id, e.id], [cs, co, ce])
        start, goal = planner.anchor_cell(s), planner.anchor_cell(e)
        if start == goal:
            col.reject("ROUTE_TRIVIAL", params)
            continue
        sx, sy = grid.center_of(start)
        bearing = math.degrees(math.atan2(o.box.center[1] - sy, o.box.center[0] - sx))
        heading = int(round(bearing / 90.0)) % 4
        offset = (bearing - heading * 90.0 + 180.0) % 360.0 - 180.0
        try:
            segments = planner.plan(start, goal, heading)
        except NoPath:
            col.reject("NO_PATH", params)
            continue
        actions, fills, text = route_actions(segments, heading, grid.cell)
        metrics.update({"blanks": len(fills), "heading_offset": q(offset), "start_cell": list(start),
                        "goal_cell": list(goal), "heading": heading, "cell": grid.cell})
        if cfg.route_min_blanks <= len(fills) <= cfg.route_max_blanks:
            metrics["consistent_fills"] = sum(
                replay_fills(grid, start, heading, actions, f) == goal
                for f in itertools.product(TURNS, repeat=len(fills)))
        else:
            metrics["consistent_fills"] = -1
        params = {**params, "actions": actions}
        ans = ", ".join(fills)
        col.offer(render("route_plan", start_obj=cs, orienting_obj=co, end_obj=ce, actions=text), ans,
                  ctx.provenance([s.id, o.id, e.id], ans, params, metrics))
    return col


# -- driver --------------------------------------------------------------------------


def generate_candidates(scene: Scene, trajectory: Trajectory, annotations: DenseAnnotations,
                        cfg: QualityConfig = QualityConfig(), seed: int = 0, qtypes=QTYPES,
                        grid: NavGrid | None = None) -> tuple[list[QAItem], list[Rejection]]:
    """Accepted open-ended items and logged rejections for one trajectory."""
    ctx = _Context(scene, trajectory, annotations, cfg, grid)
    items: list[QAItem] = []
    rejections: list[Rejection] = []
    for qt in QTYPES:
        if qt not in qtypes:
            continue
        rng = np.random.default_rng(stable_seed(seed, trajectory.id, qt))
        if qt in DIRECTION_TYPES:
            col = gen_rel_direction(ctx, rng, DIRECTION_TYPES[qt])
        else:
            col = GENERATORS[qt](ctx, rng)
        items += col.accepted
        rejections += col.rejected
    return items, rejections


GENERATORS = {
    "obj_count": gen_object_count,
    "obj_size": gen_object_size,
    "room_size": gen_room_size,
    "abs_dist": gen_abs_distance,
    "rel_dist": gen_rel_distance,
    "appearance_order": gen_appearance_order,
    "spatiotemporal_dist": gen_spatiotemporal_distance,
    "route_plan": gen_route_plan,
}


def context(scene, trajectory, annotations, cfg=QualityConfig(), grid=None) -> _Context:
    return _Context(scene, trajectory, annotations, cfg, grid)


def category_histogram(scene: Scene) -> Counter:
    return Counter(o.category for o in scene.objects)
