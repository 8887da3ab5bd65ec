"""Load externally produced scene metadata into the internal model.

The accepted document format is described by ``data/scene_doc.schema.json``.
Failures raise :class:`SchemaError` with a ``$``-rooted JSON path.
"""

from __future__ import annotations

import functools
import json
import warnings
from importlib import resources

import jsonschema

from .canonical import dumps, q
from .errors import InvariantError, SchemaError
from .geometry import Box, Rect
from .nav_trace import AgentPose, CameraConfig, Trajectory
from .observer import DenseAnnotations, Observation, compute_first_appearance
from .scene_forge import EXTERIOR, Door, ObjectInstance, Room, Scene, validate_scene

SCHEMA_VERSION = 1


@functools.lru_cache(maxsize=1)
def load_schema() -> dict:
    return json.loads(resources.files("spatialsim").joinpath("data/scene_doc.schema.json").read_text("utf-8"))


def json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _describe(err: jsonschema.ValidationError) -> tuple[str, str]:
    v, val = err.validator, err.validator_value
    found = "missing" if v == "required" else json.dumps(err.instance)[:80]
    if v == "required":
        missing = [k for k in val if isinstance(err.instance, dict) and k not in err.instance]
        return f"required field {missing[0]!r}" if missing else "required fields", "missing"
    expected = {
        "type": f"type {val}",
        "enum": f"one of {val}",
        "const": f"{val!r}",
        "minimum": f">= {val}",
        "maximum": f"<= {val}",
        "exclusiveMinimum": f"> {val}",
        "exclusiveMaximum": f"< {val}",
        "minItems": f"at least {val} items",
        "maxItems": f"at most {val} items",
        "minLength": f"at least {val} characters",
        "pattern": f"string matching {val}",
        "oneOf": "exactly one alternative",
    }.get(v, f"{v} {val}")
    return expected, found


def _first_error(doc) -> jsonschema.ValidationError | None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = list(validator.iter_errors(doc))
    if not errors:
        return None
    # deepest path first, then document order, so the report is stable
    return sorted(errors, key=lambda e: (-len(e.absolute_path), [str(p) for p in e.absolute_path]))[0]


def _missing_path(err) -> list:
    path = list(err.absolute_path)
    if err.validator == "required" and isinstance(err.instance, dict):
        for k in err.validator_value:
            if k not in err.instance:
                return path + [k]
    return path


KNOWN = {
    "$": {"schema_version", "scene", "trajectory", "observations"},
    "scene": {"id", "seed", "ceiling_height", "rooms", "doors", "objects"},
    "room": {"id", "kind", "polygon"},
    "door": {"room_a", "room_b", "segment", "width"},
    "object": {"id", "category", "center", "half_extents", "yaw", "room_id", "placement"},
    "trajectory": {"id", "camera", "poses", "room_visit_order", "walk_speed", "rotation_segments"},
    "camera": {"fps", "resolution", "horizontal_fov", "eye_height"},
    "pose": {"frame_index", "time", "position", "yaw", "eye_height"},
    "observations": {"resolution", "salience_area_fraction", "frames"},
    "frame": {"frame_index", "visible"},
    "visible": {"object_id", "area_fraction", "pixel_count"},
}


def unknown_fields(doc: dict) -> list[str]:
    found = []

    def check(obj, kind, path):
        if isinstance(obj, dict):
            found.extend(f"{path}.{k}" for k in sorted(set(obj) - KNOWN[kind]))

    check(doc, "$", "$")
    s, t, o = doc.get("scene", {}), doc.get("trajectory", {}), doc.get("observations", {})
    check(s, "scene", "$.scene")
    for key, kind in (("rooms", "room"), ("doors", "door"), ("objects", "object")):
        for i, x in enumerate(s.get(key, [])):
            check(x, kind, f"$.scene.{key}[{i}]")
    check(t, "trajectory", "$.trajectory")
    check(t.get("camera", {}), "camera", "$.trajectory.camera")
    for i, p in enumerate(t.get("poses", [])):
        check(p, "pose", f"$.trajectory.poses[{i}]")
    check(o, "observations", "$.observations")
    for i, f in enumerate(o.get("frames", [])):
        check(f, "frame", f"$.observations.frames[{i}]")
        for j, v in enumerate(f.get("visible", [])):
            check(v, "visible", f"$.observations.frames[{i}].visible[{j}]")
    return found


def _rect(poly, path) -> Rect:
    xs = sorted({p[0] for p in poly})
    ys = sorted({p[1] for p in poly})
    corners = {(x, y) for x in xs for y in ys}
    if len(xs) != 2 or len(ys) != 2 or {tuple(p) for p in poly} != corners:
        raise SchemaError(path, "axis-aligned rectangle (4 distinct corners)", json.dumps(poly))
    return Rect(float(xs[0]), float(ys[0]), float(xs[1]), float(ys[1]))


def _refcheck(doc: dict) -> None:
    s, t, o = doc["scene"], doc["trajectory"], doc["observations"]
    room_ids = [r["id"] for r in s["rooms"]]
    for i, rid in enumerate(room_ids):
        if rid in room_ids[:i]:
            raise SchemaError(f"$.scene.rooms[{i}].id", "unique room id", str(rid))
    obj_ids = [x["id"] for x in s["objects"]]
    for i, oid in enumerate(obj_ids):
        if oid in obj_ids[:i]:
            raise SchemaError(f"$.scene.objects[{i}].id", "unique object id", str(oid))
    rooms = set(room_ids)
    for i, x in enumerate(s["objects"]):
        if x["room_id"] not in rooms:
            raise SchemaError(f"$.scene.objects[{i}].room_id", f"id of a room in $.scene.rooms {sorted(rooms)}",
                              str(x["room_id"]))
    for i, d in enumerate(s["doors"]):
        for side in ("room_a", "room_b"):
            if d[side] != EXTERIOR and d[side] not in rooms:
                raise SchemaError(f"$.scene.doors[{i}].{side}", "id of a room in $.scene.rooms", str(d[side]))
    for i, rid in enumerate(t["room_visit_order"]):
        if rid not in rooms:
            raise SchemaError(f"$.trajectory.room_visit_order[{i}]", "id of a room in $.scene.rooms", str(rid))
    poses, frames = t["poses"], o["frames"]
    for i, p in enumerate(poses):
        if p["frame_index"] != i:
            raise SchemaError(f"$.trajectory.poses[{i}].frame_index", str(i), str(p["frame_index"]))
    if len(frames) != len(poses):
        raise SchemaError("$.observations.frames", f"{len(poses)} frames (one per pose)", str(len(frames)))
    objs = set(obj_ids)
    uses_pixels = False
    for i, f in enumerate(frames):
        if f["frame_index"] != i:
            raise SchemaError(f"$.observations.frames[{i}].frame_index", str(i), str(f["frame_index"]))
        seen = set()
        for j, v in enumerate(f["visible"]):
            path = f"$.observations.frames[{i}].visible[{j}].object_id"
            if v["object_id"] not in objs:
                raise SchemaError(path, "id of an object in $.scene.objects", str(v["object_id"]))
            if v["object_id"] in seen:
                raise SchemaError(path, "object listed once per frame", str(v["object_id"]))
            seen.add(v["object_id"])
            uses_pixels |= "pixel_count" in v
    if uses_pixels and "resolution" not in o:
        raise SchemaError("$.observations.resolution", "[width, height] when pixel_count is used", "missing")


def _to_models(doc: dict):
    s, t, o = doc["scene"], doc["trajectory"], doc["observations"]
    rooms = tuple(Room(int(r["id"]), _rect(r["polygon"], f"$.scene.rooms[{i}].polygon"), r["kind"])
                  for i, r in enumerate(s["rooms"]))
    doors = tuple(Door(int(d["room_a"]), d["room_b"] if d["room_b"] == EXTERIOR else int(d["room_b"]),
                       (tuple(map(float, d["segment"][0])), tuple(map(float, d["segment"][1]))),
                       float(d["width"])) for d in s["doors"])
    objects = tuple(ObjectInstance(int(x["id"]), x["category"],
                                   Box(tuple(map(float, x["center"])), tuple(map(float, x["half_extents"])),
                                       float(x["yaw"])),
                                   int(x["room_id"]), x.get("placement", "floor")) for x in s["objects"])
    scene = Scene(s["id"], rooms, doors, objects, float(s["ceiling_height"]), int(s.get("seed", 0)))

    cam = t["camera"]
    camera = CameraConfig(float(cam["fps"]), tuple(int(v) for v in cam["resolution"]),
                          float(cam["horizontal_fov"]), float(cam["eye_height"]))
    poses = tuple(AgentPose((float(p["position"][0]), float(p["position"][1])),
                            float(p.get("eye_height", camera.eye_height)), float(p["yaw"]),
                            int(p["frame_index"]), float(p["time"])) for p in t["poses"])
    traj = Trajectory(t["id"], scene.id, poses, camera, tuple(int(r) for r in t["room_visit_order"]),
                      float(t.get("walk_speed", 1.0)),
                      tuple(tuple(int(v) for v in seg) for seg in t.get("rotation_segments", [])))

    res = o.get("resolution", list(camera.resolution))
    pixels = res[0] * res[1]
    observations = []
    for f, pose in zip(o["frames"], poses):
        vis = []
        for v in f["visible"]:
            frac = v["area_fraction"] if "area_fraction" in v else v["pixel_count"] / pixels
            vis.append((int(v["object_id"]), q(min(float(frac), 1.0))))
        observations.append(Observation(int(f["frame_index"]), pose, tuple(sorted(vis))))
    thr = float(o.get("salience_area_fraction", 0.003))
    first = compute_first_appearance(scene, observations, thr)
    ann = DenseAnnotations(scene.id, traj.id, tuple(observations), first, thr)
    return scene, traj, ann


def _recheck(scene: Scene, traj: Trajectory) -> None:
    report = validate_scene(scene)
    issues = list(report.issues)
    fps = traj.camera.fps
    for p in traj.poses:
        if p.frame_index != round(p.time * fps):
            issues.append(f"pose {p.frame_index}: frame_index != round(time x fps)")
            break
    if issues:
        raise InvariantError(issues)


def parse_doc(doc, check_invariants: bool = True):
    """Validated conversion of an already-decoded document."""
    err = _first_error(doc)
    if err is not None:
        expected, found = _describe(err)
        raise SchemaError(json_path(_missing_path(err)), expected, found)
    extra = unknown_fields(doc)
    if extra:
        warnings.warn(f"ignoring unknown fields: {', '.join(extra)}", stacklevel=2)
    _refcheck(doc)
    scene, traj, ann = _to_models(doc)
    if check_invariants:
        _recheck(scene, traj)
    return scene, traj, ann


def parse_scene_doc(data: bytes | str, check_invariants: bool = True):
    """bytes -> (Scene, Trajectory, DenseAnnotations)."""
    try:
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
        doc = json.loads(text)
    except UnicodeDecodeError as exc:
        raise SchemaError("$", "UTF-8 text", f"undecodable byte at offset {exc.start}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError("$", "JSON document", f"{exc.msg} at line {exc.lineno} column {exc.colno}") from None
    return parse_doc(doc, check_invariants)


def validate_scene_doc(data: bytes | str) -> list[str]:
    """Problems found in a document without building models ([] if clean)."""
    try:
        parse_scene_doc(data, check_invariants=True)
    except (SchemaError, InvariantError) as exc:
        return [f"{exc.code}: {exc}"]
    return []


def to_scene_doc(scene: Scene, trajectory: Trajectory, annotations: DenseAnnotations) -> dict:
    def poly(r: Rect):
        return [[r.xmin, r.ymin], [r.xmax, r.ymin], [r.xmax, r.ymax], [r.xmin, r.ymax]]

    return {
        "schema_version": SCHEMA_VERSION,
        "scene": {
            "id": scene.id,
            "seed": scene.seed,
            "ceiling_height": scene.ceiling_height,
            "rooms": [{"id": r.id, "kind": r.kind, "polygon": poly(r.footprint)} for r in scene.rooms],
            "doors": [{"room_a": d.room_a, "room_b": d.room_b, "segment": [list(d.segment[0]), list(d.segment[1])],
                       "width": d.width} for d in scene.doors],
            "objects": [{"id": o.id, "category": o.category, "center": list(o.box.center),
                         "half_extents": list(o.box.half), "yaw": o.box.yaw, "room_id": o.room_id,
                         "placement": o.placement} for o in scene.objects],
        },
        "trajectory": {
            "id": trajectory.id,
            "camera": trajectory.camera.to_dict(),
            "room_visit_order": list(trajectory.room_visit_order),
            "walk_speed": trajectory.walk_speed,
            "rotation_segments": [list(s) for s in trajectory.rotation_segments],
            "poses": [{"frame_index": p.frame_index, "time": p.time, "position": list(p.position),
                       "yaw": p.yaw, "eye_height": p.eye_height} for p in trajectory.poses],
        },
        "observations": {
            "resolution": list(trajectory.camera.resolution),
            "salience_area_fraction": annotations.salience_area_fraction,
            "frames": [{"frame_index": ob.frame_index,
                        "visible": [{"object_id": i, "area_fraction": f} for i, f in ob.visible]}
                       for ob in annotations.observations],
        },
    }


def dump_scene_doc(scene, trajectory, annotations) -> str:
    return dumps(to_scene_doc(scene, trajectory, annotations))
