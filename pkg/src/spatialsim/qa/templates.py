"""Question templates, rendered verbatim with placeholders substituted."""

import re

TEMPLATES = {
    "obj_count": "How many {category}(s) are in this room?",
    "obj_size": ("What is the length of the longest dimension (length, width, or height) of the "
                 "{category}, measured in centimeters?"),
    "room_size": ("What is the size of this room (in square meters)? If multiple rooms are shown, "
                  "estimate the size of the combined space."),
    "abs_dist": ("Measuring from the closest point of each object, what is the direct distance "
                 "between the {object1} and the {object2} (in meters)?"),
    "rel_dist": ("Measuring from the closest point of each object, which of these objects "
                 "({choice_a}, {choice_b}, {choice_c}, {choice_d}) is the closest to the {category}? "
                 "If there are multiple instances of an object category, measure to the closest."),
    "rel_dir_hard": ("If I am standing by the {positioning_object} and facing the {orienting_object}, "
                     "is the {querying_object} to my front-left, front-right, back-left, or back-right? "
                     "The directions refer to the quadrants of a Cartesian plane (if I am standing at "
                     "the origin and facing along the positive y-axis)."),
    "rel_dir_med": ("If I am standing by the {positioning_object} and facing the {orienting_object}, "
                    "is the {querying_object} to my left, right, or back? An object is to my back if I "
                    "would have to turn at least 135 degrees in order to face it."),
    "rel_dir_easy": ("If I am standing by the {positioning_object} and facing the {orienting_object}, "
                     "is the {querying_object} to the left or the right of the {orienting_object}?"),
    "spatiotemporal_dist": ("Which of these objects ({choice_a}, {choice_b}, {choice_c}, {choice_d}) "
                            "is the closest to the ego-position at the last frame in the video?"),
    "appearance_order": ("What will be the first-time appearance order of the following categories "
                         "in the video: {choice_a}, {choice_b}, {choice_c}, {choice_d}?"),
    "route_plan": ("You are a robot beginning at the {start_obj} and facing the {orienting_obj}. "
                   "You want to navigate to the {end_obj}. You will perform the following actions "
                   "(Note: for each [please fill in], choose either 'turn back,' 'turn left,' or "
                   "'turn right.'): {actions} You have reached the final destination."),
}

FILL_BLANK = "[please fill in]"

DIRECTION_LABELS = {
    "hard": ("front-left", "front-right", "back-left", "back-right"),
    "med": ("left", "right", "back"),
    "easy": ("left", "right"),
}

TURNS = ("turn left", "turn right", "turn back")


def render(qtype: str, **params) -> str:
    return TEMPLATES[qtype].format(**params)


def choice_params(choices) -> dict:
    a, b, c, d = choices
    return {"choice_a": a, "choice_b": b, "choice_c": c, "choice_d": d}


def template_regex(qtype: str) -> re.Pattern:
    """Regex that matches exactly one instantiation of the template."""
    parts = re.split(r"(\{[a-z_0-9]+\})", TEMPLATES[qtype])
    out = []
    for p in parts:
        if p.startswith("{") and p.endswith("}"):
            name = p[1:-1]
            out.append(f"(?P<{name}>.+?)" if f"(?P<{name}>" not in "".join(out) else f"(?P={name})")
        else:
            out.append(re.escape(p))
    return re.compile("^" + "".join(out) + "$", re.DOTALL)
