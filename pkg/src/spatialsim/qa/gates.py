"""Quality-control configuration and the gate that accepts or rejects candidates.

Every gate reads only from the candidate's provenance metrics, so gates can be
replayed over an exported pool without touching scene geometry.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .geometry import boundary_distance
from .items import DIRECTION_TYPES, QAItem

REASONS = (
    "LOW_VISIBILITY",
    "AMBIGUOUS_CATEGORY",
    "ANSWER_BELOW_FLOOR",
    "ROUNDING_AMBIGUOUS",
    "PAIR_TOO_CLOSE",
    "DIRECTION_BOUNDARY",
    "DISTANCE_MARGIN",
    "APPEARANCE_GAP",
    "ROUTE_TRIVIAL",
    "ROUTE_TOO_LONG",
    "ROUTE_AMBIGUOUS",
    "NO_PATH",
    "DISTRACTOR_COLLISION",
)

UNIQUE_TYPES = ("obj_size", "abs_dist", "rel_dir_easy", "rel_dir_med", "rel_dir_hard", "route_plan")
ROUNDING_STEP = {"obj_size": 1.0, "room_size": 0.1, "abs_dist": 0.1}


def _default_floors() -> dict:
    return {"obj_count": 1.0, "obj_size": 1.0, "room_size": 1.0, "abs_dist": 0.3}


def _default_guards() -> dict:
    # sizes and areas are exact sums/products of 4-decimal inputs, so ties round
    # the same way in every code path; distances come from iterative solvers
    return {"obj_size": 0.0, "room_size": 0.0, "abs_dist": 1e-4}


@dataclass(frozen=True)
class QualityConfig:
    min_salient_area: float = 0.003
    min_pair_distance: float = 0.5
    direction_boundary_margin: float = 10.0
    rel_dist_margin: float = 1.15
    appearance_gap: int = 10
    numeric_answer_min: dict = field(default_factory=_default_floors)
    max_questions_per_type_per_trajectory: int = 10
    rounding_guard: dict = field(default_factory=_default_guards)
    route_min_blanks: int = 2
    route_max_blanks: int = 6
    attempts_per_slot: int = 20

    def __post_init__(self):
        for name in ("min_salient_area", "min_pair_distance", "direction_boundary_margin",
                     "appearance_gap", "max_questions_per_type_per_trajectory", "attempts_per_slot"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.rel_dist_margin > 1.0:
            raise ValueError("rel_dist_margin must exceed 1")
        if not 1 <= self.route_min_blanks <= self.route_max_blanks:
            raise ValueError("route blank bounds out of order")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "QualityConfig":
        d = dict(d)
        for k in ("numeric_answer_min", "rounding_guard"):
            if k in d:
                d[k] = {**getattr(cls(), k), **d[k]}
        return cls(**d)


@dataclass(frozen=True)
class GateResult:
    accepted: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.accepted


ACCEPT = GateResult(True)


def _reject(reason: str) -> GateResult:
    return GateResult(False, reason)


def near_rounding_boundary(value: float, step: float, guard: float) -> bool:
    """True when ``value`` sits within ``guard`` of a half-step rounding tie."""
    r = value / step - math.floor(value / step)
    return abs(r - 0.5) * step < guard


def _ratio(distances) -> float:
    d = sorted(distances)
    if d[1] == 0:
        return 1.0
    return math.inf if d[0] == 0 else d[1] / d[0]


def quality_gate(item: QAItem, cfg: QualityConfig = QualityConfig()) -> GateResult:
    m = item.provenance.metrics
    qt = item.qtype

    if m.get("min_area", 0.0) < cfg.min_salient_area:
        return _reject("LOW_VISIBILITY")
    if qt in UNIQUE_TYPES and any(n != 1 for n in m.get("salient_counts", {}).values()):
        return _reject("AMBIGUOUS_CATEGORY")

    value = item.provenance.value
    if qt in cfg.numeric_answer_min and value < cfg.numeric_answer_min[qt]:
        return _reject("ANSWER_BELOW_FLOOR")
    if qt in ROUNDING_STEP and near_rounding_boundary(value, ROUNDING_STEP[qt], cfg.rounding_guard.get(qt, 0.0)):
        return _reject("ROUNDING_AMBIGUOUS")

    pairs = m.get("pair_distances")
    if pairs is not None and min(pairs) < cfg.min_pair_distance:
        return _reject("PAIR_TOO_CLOSE")

    if qt in DIRECTION_TYPES:
        if boundary_distance(m["angle"], DIRECTION_TYPES[qt]) < cfg.direction_boundary_margin:
            return _reject("DIRECTION_BOUNDARY")
    elif qt in ("rel_dist", "spatiotemporal_dist"):
        if _ratio(m["distances"].values()) < cfg.rel_dist_margin:
            return _reject("DISTANCE_MARGIN")
    elif qt == "appearance_order":
        frames = sorted(m["first_frames"].values())
        if min(b - a for a, b in zip(frames, frames[1:])) < cfg.appearance_gap:
            return _reject("APPEARANCE_GAP")
    elif qt == "route_plan":
        if m["blanks"] < cfg.route_min_blanks:
            return _reject("ROUTE_TRIVIAL")
        if m["blanks"] > cfg.route_max_blanks:
            return _reject("ROUTE_TOO_LONG")
        if abs(m["heading_offset"]) > 45.0 - cfg.direction_boundary_margin:
            return _reject("DIRECTION_BOUNDARY")
        if m["consistent_fills"] != 1:
            return _reject("ROUTE_AMBIGUOUS")
    return ACCEPT
