"""Per-frame visibility annotations without rendering.

Each object carries a fixed, seeded set of surface samples. A frame's
on-screen area for an object is a solid-angle proxy of its camera-facing
faces, scaled by the share of samples that land in the view frustum and have
an unobstructed sightline from the eye.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .canonical import dumps, q
from .nav_trace import AgentPose, CameraConfig, Trajectory
from .scene_forge import ObjectInstance, Scene, wall_segments

NEAR_PLANE = 0.05


@dataclass(frozen=True)
class VisibilityConfig:
    surface_samples: int = 64
    salience_area_fraction: float = 0.003
    max_view_distance: float = 12.0

    def __post_init__(self):
        if self.surface_samples < 8:
            raise ValueError("surface_samples must be at least 8")
        if not 0 < self.salience_area_fraction < 0.5:
            raise ValueError("salience_area_fraction must lie in (0, 0.5)")

    def to_dict(self) -> dict:
        return {"surface_samples": self.surface_samples,
                "salience_area_fraction": self.salience_area_fraction,
                "max_view_distance": self.max_view_distance}


@dataclass(frozen=True)
class Observation:
    frame_index: int
    pose: AgentPose
    visible: tuple[tuple[int, float], ...]

    def fraction(self, object_id: int) -> float:
        for oid, frac in self.visible:
            if oid == object_id:
                return frac
        return 0.0


@dataclass(frozen=True)
class DenseAnnotations:
    scene_id: str
    trajectory_id: str
    observations: tuple[Observation, ...]
    first_appearance: dict[str, int]
    salience_area_fraction: float = 0.003

    def to_dict(self) -> dict:
        obs = self.observations
        return {
            "scene_id": self.scene_id,
            "trajectory_id": self.trajectory_id,
            "salience_area_fraction": self.salience_area_fraction,
            "first_appearance": dict(sorted(self.first_appearance.items())),
            "observations": {
                "frame_index": [o.frame_index for o in obs],
                "x": [o.pose.position[0] for o in obs],
                "y": [o.pose.position[1] for o in obs],
                "yaw": [o.pose.yaw for o in obs],
                "eye_height": [o.pose.eye_height for o in obs],
                "time": [o.pose.time for o in obs],
                "visible": [[[oid, f] for oid, f in o.visible] for o in obs],
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DenseAnnotations":
        c = d["observations"]
        obs = tuple(
            Observation(int(f), AgentPose((float(x), float(y)), float(h), float(yaw), int(f), float(t)),
                        tuple((int(oid), float(fr)) for oid, fr in vis))
            for f, x, y, yaw, h, t, vis in zip(c["frame_index"], c["x"], c["y"], c["yaw"],
                                               c["eye_height"], c["time"], c["visible"])
        )
        return cls(str(d["scene_id"]), str(d["trajectory_id"]), obs,
                   {str(k): int(v) for k, v in d["first_appearance"].items()},
                   float(d["salience_area_fraction"]))

    def dumps(self) -> str:
        return dumps(self.to_dict())

    def max_fraction(self) -> dict[int, float]:
        best: dict[int, float] = {}
        for o in self.observations:
            for oid, f in o.visible:
                if f > best.get(oid, 0.0):
                    best[oid] = f
        return best


# -- surface samples -------------------------------------------------------


def _face_grid(k: int, wa: float, wb: float, rng) -> np.ndarray:
    """k stratified-jittered points in [-1, 1]^2 for a face of size wa x wb."""
    rows = max(1, round(math.sqrt(k * wb / max(wa, 1e-9))))
    cols = math.ceil(k / rows)
    idx = np.arange(k)
    r, c = idx // cols, idx % cols
    jitter = rng.random((k, 2))
    u = (c + jitter[:, 0]) / cols * 2 - 1
    v = (r + jitter[:, 1]) / rows * 2 - 1
    return np.stack([u, v], axis=1)


def surface_samples(obj: ObjectInstance, n: int, seed: int) -> np.ndarray:
    """World-space sample points on the five non-bottom faces, shape (n, 3)."""
    hx, hy, hz = obj.box.half
    # (area, axis that is fixed, sign, the two free axes)
    faces = [
        (4 * hx * hy, 2, 1.0, (0, 1)),
        (4 * hy * hz, 0, 1.0, (1, 2)),
        (4 * hy * hz, 0, -1.0, (1, 2)),
        (4 * hx * hz, 1, 1.0, (0, 2)),
        (4 * hx * hz, 1, -1.0, (0, 2)),
    ]
    areas = np.array([f[0] for f in faces])
    base = np.maximum(1, np.floor(n * areas / areas.sum())).astype(int)
    while base.sum() > n:
        base[int(np.argmax(base))] -= 1
    rem = n * areas / areas.sum() - base
    for i in np.argsort(-rem, kind="stable")[: n - base.sum()]:
        base[i] += 1
    rng = np.random.default_rng([seed, obj.id])
    half = np.array(obj.box.half)
    pts = []
    for (area, axis, sign, free), k in zip(faces, base):
        if k == 0:
            continue
        uv = _face_grid(int(k), 2 * half[free[0]], 2 * half[free[1]], rng)
        p = np.zeros((int(k), 3))
        p[:, axis] = sign * half[axis]
        p[:, free[0]] = uv[:, 0] * half[free[0]]
        p[:, free[1]] = uv[:, 1] * half[free[1]]
        pts.append(p)
    local = np.concatenate(pts)
    c, s = math.cos(obj.box.yaw), math.sin(obj.box.yaw)
    world = np.empty_like(local)
    world[:, 0] = obj.box.center[0] + c * local[:, 0] - s * local[:, 1]
    world[:, 1] = obj.box.center[1] + s * local[:, 0] + c * local[:, 1]
    world[:, 2] = obj.box.center[2] + local[:, 2]
    return world


# -- camera ----------------------------------------------------------------


def _camera_coords(points: np.ndarray, eye, yaw: float):
    """(right, up, depth) camera coordinates for world points."""
    c, s = math.cos(yaw), math.sin(yaw)
    rx, ry, rz = points[..., 0] - eye[0], points[..., 1] - eye[1], points[..., 2] - eye[2]
    depth = rx * c + ry * s
    right = rx * s - ry * c
    return right, rz, depth


def _in_frustum(points: np.ndarray, eye, yaw: float, camera: CameraConfig) -> np.ndarray:
    right, up, depth = _camera_coords(points, eye, yaw)
    th = math.tan(math.radians(camera.horizontal_fov) / 2)
    tv = math.tan(math.radians(camera.vertical_fov) / 2)
    ok = depth > NEAR_PLANE
    safe = np.where(ok, depth, 1.0)
    return ok & (np.abs(right) <= th * safe) & (np.abs(up) <= tv * safe)


def frame_solid_angle(camera: CameraConfig) -> float:
    th = math.tan(math.radians(camera.horizontal_fov) / 2)
    tv = math.tan(math.radians(camera.vertical_fov) / 2)
    return 4 * th * tv


def _face_table(objects) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Face centers (n, 6, 3), outward normals (n, 6, 3) and areas (n, 6)."""
    n = len(objects)
    centers = np.zeros((n, 6, 3))
    normals = np.zeros((n, 6, 3))
    areas = np.zeros((n, 6))
    for i, o in enumerate(objects):
        hx, hy, hz = o.box.half
        c, s = math.cos(o.box.yaw), math.sin(o.box.yaw)
        ax = np.array([c, s, 0.0])
        ay = np.array([-s, c, 0.0])
        az = np.array([0.0, 0.0, 1.0])
        ctr = np.array(o.box.center)
        for k, (axis, h, area) in enumerate(((ax, hx, 4 * hy * hz), (ay, hy, 4 * hx * hz),
                                             (az, hz, 4 * hx * hy))):
            for sgn, slot in ((1.0, 2 * k), (-1.0, 2 * k + 1)):
                normals[i, slot] = sgn * axis
                centers[i, slot] = ctr + sgn * h * axis
                areas[i, slot] = area
    return centers, normals, areas


def _area_proxy(face_c, face_n, face_a, eye, camera: CameraConfig) -> np.ndarray:
    """Solid angle of camera-facing faces over the frame's solid angle, per object."""
    v = face_c - np.asarray(eye)
    d2 = np.maximum((v * v).sum(-1), 1e-6)
    cos = -(face_n * v).sum(-1) / np.sqrt(d2)
    omega = np.where(cos > 0, face_a * cos / d2, 0.0).sum(-1)
    return omega / frame_solid_angle(camera)


def project_extent(obj: ObjectInstance, pose: AgentPose, camera: CameraConfig = CameraConfig(),
                   cfg: VisibilityConfig = VisibilityConfig(), seed: int = 0) -> float:
    """Pre-occlusion on-screen area fraction estimate for one object."""
    eye = pose.eye
    if math.dist(obj.box.center, eye) > cfg.max_view_distance:
        return 0.0
    pts = surface_samples(obj, cfg.surface_samples, seed)
    inside = _in_frustum(pts, eye, pose.yaw, camera)
    if not inside.any():
        return 0.0
    fc, fn, fa = _face_table([obj])
    proxy = float(_area_proxy(fc, fn, fa, eye, camera)[0])
    return min(1.0, inside.sum() / len(pts) * proxy)


# -- occlusion -------------------------------------------------------------


class _Occluders:
    """Vectorized segment tests against object boxes and solid walls."""

    def __init__(self, scene: Scene, objects=None):
        objs = scene.objects if objects is None else objects
        self.ids = np.array([o.id for o in objs], dtype=np.int64)
        self.center = np.array([o.box.center for o in objs]).reshape(-1, 3)
        self.half = np.array([o.box.half for o in objs]).reshape(-1, 3)
        self.cos = np.cos([o.box.yaw for o in objs])
        self.sin = np.sin([o.box.yaw for o in objs])
        self.radius = np.linalg.norm(self.half, axis=1)
        walls = wall_segments(scene)
        self.w0 = np.array([w[0] for w in walls]).reshape(-1, 2)
        self.w1 = np.array([w[1] for w in walls]).reshape(-1, 2)

    def boxes_blocking(self, eye, targets: np.ndarray, ignore: np.ndarray, box_mask=None) -> np.ndarray:
        if box_mask is None:
            sel = np.arange(len(self.ids))
        else:
            sel = np.nonzero(box_mask)[0]
        if len(sel) == 0 or len(targets) == 0:
            return np.zeros(len(targets), dtype=bool)
        c = self.center[sel]
        h = self.half[sel]
        cs, sn = self.cos[sel], self.sin[sel]
        ox = eye[0] - c[:, 0]
        oy = eye[1] - c[:, 1]
        o_local = np.stack([ox * cs + oy * sn, -ox * sn + oy * cs, eye[2] - c[:, 2]], axis=-1)
        d = targets - np.asarray(eye)
        dl = np.stack([d[:, None, 0] * cs + d[:, None, 1] * sn,
                       -d[:, None, 0] * sn + d[:, None, 1] * cs,
                       np.broadcast_to(d[:, None, 2], (len(d), len(sel)))], axis=-1)
        dl = np.where(np.abs(dl) < 1e-12, 1e-12, dl)
        t0 = (-h[None] - o_local[None]) / dl
        t1 = (h[None] - o_local[None]) / dl
        tmin = np.minimum(t0, t1).max(-1)
        tmax = np.maximum(t0, t1).min(-1)
        length = np.linalg.norm(d, axis=1)[:, None]
        eps = 1e-4 / np.maximum(length, 1e-9)
        hit = (tmin < tmax) & (tmin < 1 - eps) & (tmax > eps)
        hit &= self.ids[sel][None, :] != ignore[:, None]
        return hit.any(axis=1)

    def walls_in_view(self, eye, yaw: float, half_fov: float) -> np.ndarray:
        """Walls not entirely behind the camera or outside one side of the view wedge."""
        c, s = math.cos(yaw), math.sin(yaw)
        th = math.tan(half_fov)
        out = np.ones(len(self.w0), dtype=bool)
        sides = []
        for w in (self.w0, self.w1):
            rx, ry = w[:, 0] - eye[0], w[:, 1] - eye[1]
            depth, right = rx * c + ry * s, rx * s - ry * c
            sides.append((depth <= 0, right > th * depth, right < -th * depth))
        for a, b in zip(*sides):
            out &= ~(a & b)
        return out

    def walls_blocking(self, eye, targets: np.ndarray, wall_mask=None) -> np.ndarray:
        w0, w1 = (self.w0, self.w1) if wall_mask is None else (self.w0[wall_mask], self.w1[wall_mask])
        if len(w0) == 0 or len(targets) == 0:
            return np.zeros(len(targets), dtype=bool)
        p = np.asarray(eye[:2])
        r = targets[:, :2] - p                      # (K, 2)
        s = w1 - w0                                 # (W, 2)
        qp = w0[None] - p                           # (1, W, 2)
        denom = r[:, None, 0] * s[None, :, 1] - r[:, None, 1] * s[None, :, 0]
        par = np.abs(denom) < 1e-12
        den = np.where(par, 1.0, denom)
        t = (qp[..., 0] * s[None, :, 1] - qp[..., 1] * s[None, :, 0]) / den
        u = (qp[..., 0] * r[:, None, 1] - qp[..., 1] * r[:, None, 0]) / den
        length = np.linalg.norm(r, axis=1)[:, None]
        eps = 1e-4 / np.maximum(length, 1e-9)
        hit = ~par & (t > 0) & (t < 1 - eps) & (u >= 0) & (u <= 1)
        return hit.any(axis=1)


def occlusion_test(point, pose: AgentPose, scene: Scene, ignore: int | None = None) -> bool:
    """True iff the eye-to-point segment is clear of walls and other objects."""
    occ = _Occluders(scene)
    tgt = np.asarray(point, dtype=float).reshape(1, 3)
    ign = np.array([-1 if ignore is None else ignore])
    blocked = occ.walls_blocking(pose.eye, tgt) | occ.boxes_blocking(pose.eye, tgt, ign)
    return not bool(blocked[0])


# -- frames ----------------------------------------------------------------


class FrameAnnotator:
    """Precomputes per-scene sample tables so frames can be annotated cheaply."""

    def __init__(self, scene: Scene, camera: CameraConfig = CameraConfig(),
                 cfg: VisibilityConfig = VisibilityConfig()):
        self.scene = scene
        self.camera = camera
        self.cfg = cfg
        self.objects = scene.objects
        n = cfg.surface_samples
        self.points = np.concatenate(
            [surface_samples(o, n, scene.seed) for o in self.objects]).reshape(-1, 3)
        self.owner_idx = np.repeat(np.arange(len(self.objects)), n)
        self.owner_id = np.array([o.id for o in self.objects], dtype=np.int64)[self.owner_idx]
        self.faces = _face_table(self.objects)
        self.occ = _Occluders(scene)
        self.centers = np.array([o.box.center for o in self.objects]).reshape(-1, 3)

    def fractions(self, pose: AgentPose) -> np.ndarray:
        """Area fraction per object (aligned with scene.objects)."""
        n_obj = len(self.objects)
        n = self.cfg.surface_samples
        out = np.zeros(n_obj)
        if n_obj == 0:
            return out
        eye = pose.eye
        in_range = np.linalg.norm(self.centers - np.asarray(eye), axis=1) <= self.cfg.max_view_distance
        inside = _in_frustum(self.points, eye, pose.yaw, self.camera) & in_range[self.owner_idx]
        if not inside.any():
            return out
        idx = np.nonzero(inside)[0]
        tgt = self.points[idx]
        box_mask = self._boxes_in_view(eye, pose.yaw)
        wall_mask = self.occ.walls_in_view(eye, pose.yaw, math.radians(self.camera.horizontal_fov) / 2)
        blocked = self.occ.walls_blocking(eye, tgt, wall_mask)
        rest = ~blocked
        if rest.any():
            sub = np.nonzero(rest)[0]
            blocked[sub] = self.occ.boxes_blocking(eye, tgt[sub], self.owner_id[idx[sub]], box_mask)
        visible = np.bincount(self.owner_idx[idx[~blocked]], minlength=n_obj)
        hit = visible > 0
        if hit.any():
            fc, fn, fa = (a[hit] for a in self.faces)
            proxy = _area_proxy(fc, fn, fa, eye, self.camera)
            out[hit] = np.minimum(1.0, visible[hit] / n * proxy)
        return out

    def _boxes_in_view(self, eye, yaw: float) -> np.ndarray:
        """Conservative mask of boxes whose bounding sphere touches the frustum."""
        right, up, depth = _camera_coords(self.occ.center, eye, yaw)
        rad = self.occ.radius
        th = math.tan(math.radians(self.camera.horizontal_fov) / 2)
        tv = math.tan(math.radians(self.camera.vertical_fov) / 2)
        ch, cv = math.sqrt(1 + th * th), math.sqrt(1 + tv * tv)
        return ((depth > -rad)
                & (np.abs(right) - th * depth <= rad * ch)
                & (np.abs(up) - tv * depth <= rad * cv))

    def observe(self, pose: AgentPose) -> Observation:
        fr = self.fractions(pose)
        vis = []
        for o, f in zip(self.objects, fr):
            v = q(min(1.0, f))
            if v > 0:
                vis.append((o.id, v))
        vis.sort()
        return Observation(pose.frame_index, pose, tuple(vis))


def annotate_frame(scene: Scene, pose: AgentPose, camera: CameraConfig = CameraConfig(),
                   cfg: VisibilityConfig = VisibilityConfig()) -> Observation:
    return FrameAnnotator(scene, camera, cfg).observe(pose)


def compute_first_appearance(scene: Scene, observations, threshold: float) -> dict[str, int]:
    cat = {o.id: o.category for o in scene.objects}
    first: dict[str, int] = {}
    for ob in observations:
        for oid, f in ob.visible:
            if f >= threshold:
                c = cat[oid]
                if c not in first:
                    first[c] = ob.frame_index
    return dict(sorted(first.items()))


def annotate_trajectory(scene: Scene, trajectory: Trajectory,
                        cfg: VisibilityConfig = VisibilityConfig()) -> DenseAnnotations:
    """One observation per pose plus per-category first salient frame."""
    ann = FrameAnnotator(scene, trajectory.camera, cfg)
    obs = tuple(ann.observe(p) for p in trajectory.poses)
    first = compute_first_appearance(scene, obs, cfg.salience_area_fraction)
    return DenseAnnotations(scene.id, trajectory.id, obs, first, cfg.salience_area_fraction)


def first_appearance_index(annotations: DenseAnnotations, category: str) -> int | None:
    return annotations.first_appearance.get(category)
