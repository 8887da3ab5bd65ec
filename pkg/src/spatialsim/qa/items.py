"""Question-answer records and their canonical serialization."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..canonical import dumps

QTYPES = (
    "obj_count", "obj_size", "room_size", "abs_dist", "rel_dist",
    "rel_dir_easy", "rel_dir_med", "rel_dir_hard",
    "appearance_order", "spatiotemporal_dist", "route_plan",
)
FORMATS = ("open_ended", "multiple_choice")
LETTERS = ("A", "B", "C", "D")
NUMERIC_TYPES = ("obj_count", "obj_size", "room_size", "abs_dist")
DIRECTION_TYPES = {"rel_dir_easy": "easy", "rel_dir_med": "med", "rel_dir_hard": "hard"}


@dataclass(frozen=True)
class Provenance:
    scene_id: str
    trajectory_id: str
    object_ids: tuple[int, ...] = ()
    value: float | str | None = None
    params: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"scene_id": self.scene_id, "trajectory_id": self.trajectory_id,
                "object_ids": list(self.object_ids), "value": self.value,
                "params": self.params, "metrics": self.metrics}

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        return cls(d["scene_id"], d["trajectory_id"], tuple(int(i) for i in d["object_ids"]),
                   d.get("value"), dict(d.get("params", {})), dict(d.get("metrics", {})))


@dataclass(frozen=True)
class QAItem:
    id: str
    qtype: str
    format: str
    question: str
    answer: str
    provenance: Provenance
    choices: tuple[str, ...] | None = None
    correct_letter: str | None = None

    def __post_init__(self):
        if self.qtype not in QTYPES:
            raise ValueError(f"unknown qtype {self.qtype!r}")
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}")
        if self.format == "multiple_choice":
            if self.choices is None or len(self.choices) != 4 or len(set(self.choices)) != 4:
                raise ValueError(f"{self.id}: multiple choice needs 4 distinct choices")
            if self.correct_letter not in LETTERS:
                raise ValueError(f"{self.id}: bad correct_letter {self.correct_letter!r}")
            if self.choices[LETTERS.index(self.correct_letter)] != self.answer:
                raise ValueError(f"{self.id}: answer does not match the correct choice")
        elif self.choices is not None or self.correct_letter is not None:
            raise ValueError(f"{self.id}: open-ended items carry no choices")

    @property
    def bucket(self) -> tuple[str, str]:
        return (self.qtype, self.format)

    def with_(self, **kw) -> "QAItem":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {"id": self.id, "qtype": self.qtype, "format": self.format,
                "question": self.question, "answer": self.answer,
                "choices": None if self.choices is None else list(self.choices),
                "correct_letter": self.correct_letter,
                "provenance": self.provenance.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "QAItem":
        return cls(d["id"], d["qtype"], d["format"], d["question"], d["answer"],
                   Provenance.from_dict(d["provenance"]),
                   None if d.get("choices") is None else tuple(d["choices"]),
                   d.get("correct_letter"))

    def dumps(self) -> str:
        return dumps(self.to_dict())


def format_answer(qtype: str, value) -> str:
    """Rounding rules: sizes in whole centimeters, distances and areas to 0.1."""
    if qtype == "obj_count":
        return str(int(value))
    if qtype == "obj_size":
        return f"{value:.0f}"
    if qtype in ("room_size", "abs_dist"):
        return f"{value:.1f}"
    return str(value)


def read_items(path) -> list[QAItem]:
    import json

    with open(path, encoding="utf-8") as fh:
        return [QAItem.from_dict(json.loads(line)) for line in fh if line.strip()]


def write_items(path, items) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for it in items:
            fh.write(it.dumps())
            fh.write("\n")
