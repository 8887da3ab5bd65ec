"""Free-space grid, room tours, and fixed-rate pose sequences.

The agent visits every room center by greedy nearest-unvisited order over
4-connected BFS distances, walking string-pulled versions of the grid paths
and turning a full circle at every center.
"""

from __future__ import annotations

import functools
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .canonical import dumps, q
from .errors import TrajectoryTooLong, UnknownRoom, UnreachableRoom
from .geometry import wrap_angle

MIN_FRAMES = 60
MAX_FRAMES = 1800
MAX_WALK_SPEED = 2.0
TURN_IN_PLACE_ABOVE = math.radians(45.0)


@dataclass(frozen=True)
class CameraConfig:
    fps: float = 10.0
    resolution: tuple[int, int] = (680, 384)
    horizontal_fov: float = 90.0
    eye_height: float = 1.5

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if not 20.0 < self.horizontal_fov < 170.0:
            raise ValueError("horizontal_fov must lie in (20, 170) degrees")

    @property
    def vertical_fov(self) -> float:
        w, h = self.resolution
        return math.degrees(2 * math.atan(math.tan(math.radians(self.horizontal_fov) / 2) * h / w))

    def to_dict(self) -> dict:
        return {"fps": self.fps, "resolution": list(self.resolution),
                "horizontal_fov": self.horizontal_fov, "eye_height": self.eye_height}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraConfig":
        return cls(float(d["fps"]), tuple(int(v) for v in d["resolution"]),
                   float(d["horizontal_fov"]), float(d["eye_height"]))


@dataclass(frozen=True)
class Speeds:
    walk: float = 1.0   # m/s
    turn: float = 90.0  # deg/s


@dataclass(frozen=True)
class AgentPose:
    position: tuple[float, float]
    eye_height: float
    yaw: float
    frame_index: int
    time: float

    @property
    def eye(self) -> tuple[float, float, float]:
        return (self.position[0], self.position[1], self.eye_height)


@dataclass(frozen=True)
class Trajectory:
    id: str
    scene_id: str
    poses: tuple[AgentPose, ...]
    camera: CameraConfig
    room_visit_order: tuple[int, ...]
    walk_speed: float = 1.0
    rotation_segments: tuple[tuple[int, int, int], ...] = field(default=())
    """(room id, first frame, last frame) of each full-turn segment."""

    def to_dict(self) -> dict:
        cols = {
            "x": [p.position[0] for p in self.poses],
            "y": [p.position[1] for p in self.poses],
            "yaw": [p.yaw for p in self.poses],
            "eye_height": [p.eye_height for p in self.poses],
            "frame_index": [p.frame_index for p in self.poses],
            "time": [p.time for p in self.poses],
        }
        return {
            "id": self.id,
            "scene_id": self.scene_id,
            "camera": self.camera.to_dict(),
            "room_visit_order": list(self.room_visit_order),
            "walk_speed": self.walk_speed,
            "rotation_segments": [list(s) for s in self.rotation_segments],
            "poses": cols,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        c = d["poses"]
        poses = tuple(
            AgentPose((float(x), float(y)), float(h), float(yaw), int(f), float(t))
            for x, y, yaw, h, f, t in zip(c["x"], c["y"], c["yaw"], c["eye_height"],
                                          c["frame_index"], c["time"])
        )
        return cls(str(d["id"]), str(d["scene_id"]), poses, CameraConfig.from_dict(d["camera"]),
                   tuple(int(r) for r in d["room_visit_order"]), float(d.get("walk_speed", 1.0)),
                   tuple(tuple(int(v) for v in s) for s in d.get("rotation_segments", [])))

    def dumps(self) -> str:
        return dumps(self.to_dict())


# -- grid ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NavGrid:
    cell: float
    origin: tuple[float, float]
    occupancy: np.ndarray          # (nx, ny) True = blocked
    block_x: np.ndarray            # (nx-1, ny) move (i,j)->(i+1,j) crosses a wall
    block_y: np.ndarray            # (nx, ny-1) move (i,j)->(i,j+1) crosses a wall
    agent_radius: float = 0.2

    @property
    def shape(self) -> tuple[int, int]:
        return self.occupancy.shape

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        ix = int(math.floor((x - self.origin[0]) / self.cell + 1e-9))
        iy = int(math.floor((y - self.origin[1]) / self.cell + 1e-9))
        nx, ny = self.shape
        return (min(max(ix, 0), nx - 1), min(max(iy, 0), ny - 1))

    def center_of(self, c: tuple[int, int]) -> tuple[float, float]:
        return (self.origin[0] + (c[0] + 0.5) * self.cell, self.origin[1] + (c[1] + 0.5) * self.cell)

    def in_bounds(self, c) -> bool:
        return 0 <= c[0] < self.shape[0] and 0 <= c[1] < self.shape[1]

    def is_free(self, c) -> bool:
        return self.in_bounds(c) and not self.occupancy[c[0], c[1]]

    def can_move(self, a, b) -> bool:
        if not (self.is_free(a) and self.is_free(b)):
            return False
        dx, dy = b[0] - a[0], b[1] - a[1]
        if abs(dx) + abs(dy) != 1:
            return False
        if dx:
            return not self.block_x[min(a[0], b[0]), a[1]]
        return not self.block_y[a[0], min(a[1], b[1])]

    @functools.cached_property
    def _adjacency(self) -> list[list[int]]:
        """Flat-index neighbor lists in lexicographic cell order."""
        nx, ny = self.shape
        free = ~self.occupancy
        mx = free[:-1, :] & free[1:, :] & ~self.block_x
        my = free[:, :-1] & free[:, 1:] & ~self.block_y
        adj: list[list[int]] = [[] for _ in range(nx * ny)]
        for i in range(nx):
            for j in range(ny):
                if not free[i, j]:
                    continue
                out = adj[i * ny + j]
                if i > 0 and mx[i - 1, j]:
                    out.append((i - 1) * ny + j)
                if j > 0 and my[i, j - 1]:
                    out.append(i * ny + j - 1)
                if j < ny - 1 and my[i, j]:
                    out.append(i * ny + j + 1)
                if i < nx - 1 and mx[i, j]:
                    out.append((i + 1) * ny + j)
        return adj

    def neighbors(self, c):
        """Free 4-neighbors in lexicographic cell order."""
        ny = self.shape[1]
        for n in self._adjacency[c[0] * ny + c[1]]:
            yield divmod(n, ny)

    def bfs(self, start) -> np.ndarray:
        """Unit-cost 4-connected distances from ``start``; -1 where unreachable."""
        nx, ny = self.shape
        dist = [-1] * (nx * ny)
        if self.is_free(start):
            adj = self._adjacency
            s = start[0] * ny + start[1]
            dist[s] = 0
            queue = deque([s])
            while queue:
                c = queue.popleft()
                d = dist[c] + 1
                for n in adj[c]:
                    if dist[n] < 0:
                        dist[n] = d
                        queue.append(n)
        return np.array(dist, dtype=np.int64).reshape(nx, ny)

    def shortest_path(self, start, goal, dist_to_goal: np.ndarray | None = None):
        """Canonical shortest path: at each step take the lexicographically first
        neighbor that is one step closer to ``goal``."""
        if dist_to_goal is None:
            dist_to_goal = self.bfs(goal)
        if dist_to_goal[start] < 0:
            return None
        path = [start]
        c = start
        while c != goal:
            want = dist_to_goal[c] - 1
            c = next(n for n in self.neighbors(c) if dist_to_goal[n] == want)
            path.append(c)
        return path

    def segment_cells(self, a, b) -> list[tuple[int, int]]:
        """Cells crossed by segment a-b, in order."""
        ax, ay = (a[0] - self.origin[0]) / self.cell, (a[1] - self.origin[1]) / self.cell
        bx, by = (b[0] - self.origin[0]) / self.cell, (b[1] - self.origin[1]) / self.cell
        ts = {0.0, 1.0}
        for p0, p1 in ((ax, bx), (ay, by)):
            if abs(p1 - p0) > 1e-12:
                lo, hi = sorted((p0, p1))
                for k in range(math.floor(lo) + 1, math.ceil(hi)):
                    ts.add((k - p0) / (p1 - p0))
        ts = sorted(t for t in ts if 0.0 <= t <= 1.0)
        cells = []
        for t0, t1 in zip(ts, ts[1:]):
            tm = (t0 + t1) / 2
            c = (math.floor(ax + (bx - ax) * tm), math.floor(ay + (by - ay) * tm))
            if not cells or cells[-1] != c:
                cells.append(c)
        if not cells:
            cells.append((math.floor(ax), math.floor(ay)))
        return cells

    def segment_is_free(self, a, b, margin: float = 1e-3) -> bool:
        """Segment (thickened by ``margin``) stays in free cells and crosses no wall."""
        dx, dy = b[0] - a[0], b[1] - a[1]
        norm = math.hypot(dx, dy)
        offsets = [(0.0, 0.0)]
        if norm > 0 and margin > 0:
            nx, ny = -dy / norm * margin, dx / norm * margin
            offsets += [(nx, ny), (-nx, -ny)]
        for ox, oy in offsets:
            cells = self.segment_cells((a[0] + ox, a[1] + oy), (b[0] + ox, b[1] + oy))
            for c in cells:
                if not self.is_free(c):
                    return False
            for c0, c1 in zip(cells, cells[1:]):
                if abs(c0[0] - c1[0]) + abs(c0[1] - c1[1]) == 1:
                    if not self.can_move(c0, c1):
                        return False
                else:
                    mids = [(c1[0], c0[1]), (c0[0], c1[1])]
                    if not any(self.can_move(c0, m) and self.can_move(m, c1) for m in mids):
                        return False
        return True


def _dist_to_segments(px: np.ndarray, py: np.ndarray, segs) -> np.ndarray:
    out = np.full(px.shape, np.inf)
    for (x0, y0), (x1, y1) in segs:
        dx, dy = x1 - x0, y1 - y0
        ll = dx * dx + dy * dy
        t = np.zeros_like(px) if ll == 0 else np.clip(((px - x0) * dx + (py - y0) * dy) / ll, 0, 1)
        out = np.minimum(out, np.hypot(x0 + t * dx - px, y0 + t * dy - py))
    return out


def build_navgrid(scene, cell: float = 0.25, agent_radius: float = 0.2) -> NavGrid:
    """Rasterize free space for an agent disc of ``agent_radius``."""
    from .scene_forge import wall_segments

    if cell <= 0 or agent_radius < 0:
        raise ValueError("cell must be positive and agent_radius nonnegative")
    b = scene.bounds()
    nx = max(1, int(math.ceil(b.width / cell - 1e-9)))
    ny = max(1, int(math.ceil(b.depth / cell - 1e-9)))
    origin = (b.xmin, b.ymin)
    xs = origin[0] + (np.arange(nx) + 0.5) * cell
    ys = origin[1] + (np.arange(ny) + 0.5) * cell
    px, py = np.meshgrid(xs, ys, indexing="ij")

    inside = np.zeros((nx, ny), dtype=bool)
    for r in scene.rooms:
        f = r.footprint
        inside |= (px > f.xmin) & (px < f.xmax) & (py > f.ymin) & (py < f.ymax)
    blocked = ~inside
    walls = wall_segments(scene)
    if walls:
        d = _dist_to_segments(px, py, walls)
        blocked |= (d < agent_radius) | (d <= 1e-9)
    for o in scene.objects:
        if o.placement != "floor":
            continue
        box = o.box
        c, s = math.cos(box.yaw), math.sin(box.yaw)
        lx = (px - box.center[0]) * c + (py - box.center[1]) * s
        ly = -(px - box.center[0]) * s + (py - box.center[1]) * c
        ex = np.maximum(np.abs(lx) - box.half[0], 0)
        ey = np.maximum(np.abs(ly) - box.half[1], 0)
        dist = np.hypot(ex, ey)
        blocked |= (dist < agent_radius) | ((np.abs(lx) < box.half[0]) & (np.abs(ly) < box.half[1]))

    block_x = np.zeros((max(nx - 1, 0), ny), dtype=bool)
    block_y = np.zeros((nx, max(ny - 1, 0)), dtype=bool)
    for (x0, y0), (x1, y1) in walls:
        if abs(x0 - x1) < 1e-9:  # vertical wall blocks moves along x
            k = np.nonzero((xs[:-1] < x0) & (xs[1:] > x0))[0]
            rows = np.nonzero((ys >= min(y0, y1) - 1e-9) & (ys <= max(y0, y1) + 1e-9))[0]
            block_x[np.ix_(k, rows)] = True
        elif abs(y0 - y1) < 1e-9:
            k = np.nonzero((ys[:-1] < y0) & (ys[1:] > y0))[0]
            cols = np.nonzero((xs >= min(x0, x1) - 1e-9) & (xs <= max(x0, x1) + 1e-9))[0]
            block_y[np.ix_(cols, k)] = True
        else:
            raise ValueError("walls must be axis-aligned")

    grid = NavGrid(cell, origin, blocked, block_x, block_y, agent_radius)
    centers = [grid.cell_of(*r.center) for r in scene.rooms]
    for r, c in zip(scene.rooms, centers):
        if not grid.is_free(c):
            raise UnreachableRoom(f"center of room {r.id} is blocked")
    dist = grid.bfs(centers[0])
    for r, c in zip(scene.rooms, centers):
        if dist[c] < 0:
            raise UnreachableRoom(f"room {r.id} unreachable from room {scene.rooms[0].id}")
    return grid


# -- tour ------------------------------------------------------------------


def plan_tour(grid: NavGrid, scene, start_room: int):
    """Greedy nearest-unvisited tour; returns [(room id, grid path), ...]."""
    ids = sorted(r.id for r in scene.rooms)
    if start_room not in ids:
        raise UnknownRoom(f"room {start_room} not in scene {scene.id}")
    centers = {r.id: grid.cell_of(*r.center) for r in scene.rooms}
    tour = [(start_room, [])]
    current = start_room
    unvisited = [i for i in ids if i != start_room]
    while unvisited:
        dist = grid.bfs(centers[current])
        reach = [(int(dist[centers[i]]), i) for i in unvisited if dist[centers[i]] >= 0]
        if len(reach) != len(unvisited):
            raise UnreachableRoom(f"room(s) unreachable from room {current}")
        _, nxt = min(reach)
        path = grid.shortest_path(centers[current], centers[nxt])
        tour.append((nxt, path))
        unvisited.remove(nxt)
        current = nxt
    return tour


def smooth_path(grid: NavGrid, points):
    """Greedy string pulling: keep the farthest waypoint reachable in a straight line."""
    if len(points) <= 2:
        return list(points)
    out = [points[0]]
    i = 0
    while i < len(points) - 1:
        j = len(points) - 1
        while j > i + 1 and not grid.segment_is_free(points[i], points[j]):
            j -= 1
        out.append(points[j])
        i = j
    return out


class _PoseWriter:
    def __init__(self, camera: CameraConfig):
        self.camera = camera
        self.poses: list[AgentPose] = []

    def emit(self, pos, yaw):
        f = len(self.poses)
        self.poses.append(AgentPose((q(pos[0]), q(pos[1])), q(self.camera.eye_height),
                                    q(wrap_angle(yaw)), f, q(f / self.camera.fps)))


def _synthesize(tour, scene, camera: CameraConfig, speeds: Speeds, walk: float, grid: NavGrid):
    fps = camera.fps
    step = walk / fps
    turn_step = math.radians(speeds.turn) / fps
    n_rot = math.ceil(360.0 / speeds.turn * fps - 1e-9)
    # tiny overshoot so the quantized sweep never falls short of a full turn
    rot_step = (2 * math.pi + 2e-4) / n_rot
    w = _PoseWriter(camera)
    rooms = {r.id: r for r in scene.rooms}
    yaw = 0.0
    pos = rooms[tour[0][0]].center
    w.emit(pos, yaw)
    segments = []
    for room_id, path in tour:
        target = rooms[room_id].center
        if path:
            pts = [pos] + [grid.center_of(c) for c in path[1:-1]] + [target]
            pts = smooth_path(grid, pts)
            for a, b in zip(pts, pts[1:]):
                length = math.hypot(b[0] - a[0], b[1] - a[1])
                if length < 1e-9:
                    continue
                heading = math.atan2(b[1] - a[1], b[0] - a[0])
                delta = wrap_angle(heading - yaw)
                if abs(delta) > TURN_IN_PLACE_ABOVE:
                    n = math.ceil(abs(delta) / turn_step - 1e-9)
                    for k in range(1, n + 1):
                        w.emit(a, yaw + delta * k / n)
                yaw = heading
                n = max(1, math.ceil(length / step - 1e-9))
                for k in range(1, n + 1):
                    w.emit((a[0] + (b[0] - a[0]) * k / n, a[1] + (b[1] - a[1]) * k / n), yaw)
            pos = target
        first = len(w.poses) - 1
        for k in range(1, n_rot + 1):
            w.emit(pos, yaw + rot_step * k)
        yaw = yaw + rot_step * n_rot
        segments.append((room_id, first, len(w.poses) - 1))
    while len(w.poses) < MIN_FRAMES:
        yaw += rot_step
        w.emit(pos, yaw)
    last = segments[-1]
    segments[-1] = (last[0], last[1], len(w.poses) - 1)
    return w.poses, segments


def synthesize_poses(tour, scene, camera: CameraConfig = CameraConfig(), speeds: Speeds = Speeds(),
                     grid: NavGrid | None = None, trajectory_id: str | None = None) -> Trajectory:
    """Sample poses at ``camera.fps`` along the tour, with a full turn at each center.

    Short trajectories are padded by extending the final rotation; long ones are
    re-timed with faster walking, up to 2 m/s.
    """
    if grid is None:
        grid = build_navgrid(scene)
    walk = speeds.walk
    while True:
        poses, segments = _synthesize(tour, scene, camera, speeds, walk, grid)
        if len(poses) <= MAX_FRAMES:
            break
        if walk >= MAX_WALK_SPEED - 1e-9:
            raise TrajectoryTooLong(f"{len(poses)} frames even at {MAX_WALK_SPEED} m/s")
        walk = min(MAX_WALK_SPEED, round(walk + 0.1, 6))
    tid = trajectory_id or f"{scene.id}_t{tour[0][0]}"
    return Trajectory(tid, scene.id, tuple(poses), camera, tuple(r for r, _ in tour), walk,
                      tuple(segments))


def start_rooms(scene, n: int, seed: int) -> list[int]:
    ids = sorted(r.id for r in scene.rooms)
    return [ids[(seed + k) % len(ids)] for k in range(n)]


def make_trajectories(scene, n: int = 2, seed: int = 0, camera: CameraConfig = CameraConfig(),
                      speeds: Speeds = Speeds(), grid: NavGrid | None = None) -> list[Trajectory]:
    """``n`` tours of ``scene`` with round-robin start rooms."""
    if grid is None:
        grid = build_navgrid(scene)
    out = []
    for k, start in enumerate(start_rooms(scene, n, seed)):
        tour = plan_tour(grid, scene, start)
        out.append(synthesize_poses(tour, scene, camera, speeds, grid, f"{scene.id}_t{k}"))
    return out
