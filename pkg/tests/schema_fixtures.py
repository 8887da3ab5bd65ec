"""Twenty ways to break a scene document, each with the path the error must name."""

import json


def busy_frame(d):
    """Index of the first frame that sees anything."""
    return next(i for i, f in enumerate(d["observations"]["frames"]) if f["visible"])


def expected_path(doc, template):
    return template.format(busy=busy_frame(doc))


def mutated(doc_text, mutate):
    d = json.loads(doc_text)
    mutate(d)
    return json.dumps(d)


def _set(path):
    def f(d, value):
        node = d
        for p in path[:-1]:
            node = node[p]
        node[path[-1]] = value
    return f


def _del(*path):
    def f(d):
        node = d
        for p in path[:-1]:
            node = node[p]
        del node[path[-1]]
    return f


def m_polygon_triangle(d):
    d["scene"]["rooms"][0]["polygon"] = d["scene"]["rooms"][0]["polygon"][:3]


def m_polygon_skew(d):
    d["scene"]["rooms"][0]["polygon"][2][0] += 0.5


def m_dup_object(d):
    d["scene"]["objects"][1]["id"] = d["scene"]["objects"][0]["id"]


def m_drop_frame(d):
    d["observations"]["frames"].pop()


def m_ghost_object(d):
    d["observations"]["frames"][busy_frame(d)]["visible"][0]["object_id"] = 9999


def m_both_measures(d):
    d["observations"]["frames"][busy_frame(d)]["visible"][0]["pixel_count"] = 10


def m_fraction_range(d):
    d["observations"]["frames"][busy_frame(d)]["visible"][0]["area_fraction"] = 1.5


def m_pixels_no_resolution(d):
    v = d["observations"]["frames"][busy_frame(d)]["visible"][0]
    v.pop("area_fraction")
    v["pixel_count"] = 500
    d["observations"].pop("resolution")


MUTATIONS = [
    ("missing_version", _del("schema_version"), "$.schema_version"),
    ("future_version", lambda d: _set(["schema_version"])(d, 2), "$.schema_version"),
    ("missing_scene", _del("scene"), "$.scene"),
    ("triangle_room", m_polygon_triangle, "$.scene.rooms[0].polygon"),
    ("skewed_room", m_polygon_skew, "$.scene.rooms[0].polygon"),
    ("object_room_unknown", lambda d: _set(["scene", "objects", 0, "room_id"])(d, 999),
     "$.scene.objects[0].room_id"),
    ("object_room_missing", _del("scene", "objects", 1, "room_id"), "$.scene.objects[1].room_id"),
    ("half_extents_short", lambda d: _set(["scene", "objects", 0, "half_extents"])(d, [0.1, 0.2]),
     "$.scene.objects[0].half_extents"),
    ("center_not_number", lambda d: _set(["scene", "objects", 0, "center", 1])(d, "x"),
     "$.scene.objects[0].center[1]"),
    ("category_not_string", lambda d: _set(["scene", "objects", 2, "category"])(d, 5),
     "$.scene.objects[2].category"),
    ("duplicate_object_id", m_dup_object, "$.scene.objects[1].id"),
    ("door_room_unknown", lambda d: _set(["scene", "doors", 0, "room_b"])(d, 77), "$.scene.doors[0].room_b"),
    ("negative_fps", lambda d: _set(["trajectory", "camera", "fps"])(d, -1), "$.trajectory.camera.fps"),
    ("frame_index_gap", lambda d: _set(["trajectory", "poses", 3, "frame_index"])(d, 7),
     "$.trajectory.poses[3].frame_index"),
    ("pose_time_missing", _del("trajectory", "poses", 2, "time"), "$.trajectory.poses[2].time"),
    ("visit_unknown_room", lambda d: _set(["trajectory", "room_visit_order", 0])(d, 42),
     "$.trajectory.room_visit_order[0]"),
    ("frame_count", m_drop_frame, "$.observations.frames"),
    ("ghost_visible", m_ghost_object, "$.observations.frames[{busy}].visible[0].object_id"),
    ("both_measures", m_both_measures, "$.observations.frames[{busy}].visible[0]"),
    ("fraction_above_one", m_fraction_range, "$.observations.frames[{busy}].visible[0].area_fraction"),
    ("pixels_without_resolution", m_pixels_no_resolution, "$.observations.resolution"),
]
