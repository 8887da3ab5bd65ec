"""Dataset assembly to a target bucket distribution, JSONL export, and statistics."""

from __future__ import annotations

import json
import math
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .canonical import digest, dumps, q, sha256_text
from .errors import InsufficientPool
from .qa.items import FORMATS, LETTERS, NUMERIC_TYPES, QTYPES, QAItem

OE, MC = "open_ended", "multiple_choice"
Bucket = tuple[str, str]


def bucket_key(b: Bucket) -> str:
    return f"{b[0]}/{b[1]}"


def parse_bucket(s: str) -> Bucket:
    qtype, _, fmt = s.partition("/")
    fmt = {"oe": OE, "mc": MC}.get(fmt.lower(), fmt)
    if qtype not in QTYPES or fmt not in FORMATS:
        raise ValueError(f"bad bucket {s!r}; expected '<qtype>/<oe|mc>'")
    return (qtype, fmt)


@dataclass(frozen=True)
class MixSpec:
    name: str
    total: int
    weights: dict
    seed: int = 0

    def __post_init__(self):
        if self.total < 1:
            raise ValueError("total must be >= 1")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be nonnegative")
        s = sum(self.weights.values())
        if abs(s - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {s}, not 1")

    def with_(self, **kw) -> "MixSpec":
        return MixSpec(**{**self.__dict__, **kw})

    def to_dict(self) -> dict:
        return {"name": self.name, "total": self.total, "seed": self.seed,
                "weights": {bucket_key(b): w for b, w in sorted(self.weights.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "MixSpec":
        if "mix" in d and "weights" not in d:
            base = builtin_mix(d["mix"], int(d.get("total", 1000)), int(d.get("seed", 0)))
            return base
        weights = {parse_bucket(k): float(v) for k, v in d["weights"].items()}
        s = sum(weights.values())
        if d.get("normalize", False) and s > 0:
            weights = {k: v / s for k, v in weights.items()}
        return cls(str(d.get("name", "custom")), int(d["total"]), weights, int(d.get("seed", 0)))


# -- builtin mixes ---------------------------------------------------------------

VSI_BASELINE_PERCENT = {
    ("abs_dist", OE): 16.9,
    ("obj_size", OE): 19.3,
    ("room_size", OE): 5.8,
    ("obj_count", OE): 11.4,
    ("rel_dist", MC): 14.4,
    ("rel_dir_easy", MC): 19.6 / 3,
    ("rel_dir_med", MC): 19.6 / 3,
    ("rel_dir_hard", MC): 19.6 / 3,
    ("route_plan", MC): 0.0,
    ("appearance_order", MC): 12.5,
}

SIMS_VSI_COUNTS = {
    "abs_dist": 12510,
    "appearance_order": 12477,
    "obj_count": 12503,
    "rel_dir_easy": 12250,
    "rel_dir_med": 12247,
    "rel_dir_hard": 12230,
    "rel_dist": 12295,
    "obj_size": 12503,
    "room_size": 2509,
}


def _normalized(raw: dict) -> dict:
    s = sum(raw.values())
    return {k: v / s for k, v in raw.items()}


def builtin_mix(name: str, total: int = 1000, seed: int = 0) -> MixSpec:
    key = name.lower().replace("-", "_")
    if key == "vsi_baseline":
        return MixSpec("vsi_baseline", total, _normalized(VSI_BASELINE_PERCENT), seed)
    if key in ("three_q", "3q"):
        w = {("abs_dist", OE): 1 / 3, ("rel_dir_hard", MC): 1 / 3, ("appearance_order", MC): 1 / 3}
        return MixSpec("three_q", total, w, seed)
    if key == "sims_vsi":
        raw = {(t, f): n for t, n in SIMS_VSI_COUNTS.items() for f in (OE, MC)}
        return MixSpec("sims_vsi", total, _normalized(raw), seed)
    raise KeyError(f"unknown builtin mix {name!r}; choose vsi_baseline, three_q or sims_vsi")


BUILTIN_MIXES = ("vsi_baseline", "three_q", "sims_vsi")


def bucket_sizes(weights: dict, total: int) -> dict:
    """round(weight x total) per bucket, fixed up by largest remainder to sum to total."""
    keys = sorted(weights)
    exact = {k: weights[k] * total for k in keys}
    sizes = {k: math.floor(exact[k]) for k in keys}
    short = total - sum(sizes.values())
    order = sorted(keys, key=lambda k: (-(exact[k] - sizes[k]), k))
    for k in order[:short]:
        sizes[k] += 1
    return sizes


# -- assembly --------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    name: str
    seed: int
    items: tuple
    spec: MixSpec | None = None

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


def pool_by_bucket(pool) -> dict:
    out: dict = defaultdict(list)
    for it in pool:
        out[it.bucket].append(it)
    for v in out.values():
        v.sort(key=lambda it: it.id)
    return out


def assemble_mix(pool, spec: MixSpec) -> Dataset:
    groups = pool_by_bucket(pool)
    sizes = bucket_sizes(spec.weights, spec.total)
    for b, need in sizes.items():
        have = len(groups.get(b, ()))
        if have < need:
            raise InsufficientPool(b, have, need)
    rng = np.random.default_rng(spec.seed)
    chosen = []
    for b in sorted(sizes):
        if sizes[b]:
            items = groups[b]
            idx = np.sort(rng.choice(len(items), size=sizes[b], replace=False))
            chosen.extend(items[i] for i in idx)
    order = rng.permutation(len(chosen))
    return Dataset(spec.name, spec.seed, tuple(chosen[i] for i in order), spec)


# -- export ----------------------------------------------------------------------


@dataclass(frozen=True)
class ExportConfig:
    pre_prompt: str = "These are frames of a video."
    mc_post_prompt: str = "Answer with the option's letter from the given choices directly."
    oe_post_prompt: str = "Please answer the question using a single word or phrase."
    video_path_template: str = "videos/{scene_id}/{trajectory_id}.mp4"
    mc_target: str = "letter"  # assistant turn for multiple choice: "letter" or "text"

    def __post_init__(self):
        if self.mc_target not in ("letter", "text"):
            raise ValueError("mc_target must be 'letter' or 'text'")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "ExportConfig":
        return cls(**d)


def human_turn(item: QAItem, cfg: ExportConfig = ExportConfig()) -> str:
    if item.format == MC:
        lines = "\n".join(f"{k}. {c}" for k, c in zip(LETTERS, item.choices))
        return f"{cfg.pre_prompt}\n{item.question}\n{lines}\n{cfg.mc_post_prompt}"
    return f"{cfg.pre_prompt}\n{item.question}\n{cfg.oe_post_prompt}"


def assistant_turn(item: QAItem, cfg: ExportConfig = ExportConfig()) -> str:
    if item.format == MC and cfg.mc_target == "letter":
        return item.correct_letter
    return item.answer


def export_record(item: QAItem, cfg: ExportConfig = ExportConfig()) -> dict:
    p = item.provenance
    return {
        "id": item.id,
        "video": cfg.video_path_template.format(scene_id=p.scene_id, trajectory_id=p.trajectory_id),
        "conversations": [{"from": "human", "value": human_turn(item, cfg)},
                          {"from": "gpt", "value": assistant_turn(item, cfg)}],
        "qtype": item.qtype,
        "format": item.format,
        "meta": item.to_dict(),
    }


def export_lines(dataset, cfg: ExportConfig = ExportConfig()) -> str:
    return "".join(dumps(export_record(it, cfg)) + "\n" for it in dataset)


def export_jsonl(dataset: Dataset, cfg: ExportConfig, out_path, manifest_path=None) -> dict:
    """Write one conversation record per line plus a manifest; returns the manifest."""
    if len(dataset) == 0:
        raise ValueError("refusing to export an empty dataset")
    out_path = Path(out_path)
    text = export_lines(dataset, cfg)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_bytes(text.encode("utf-8"))
    except OSError as exc:
        raise OSError(f"cannot write {out_path}: {exc.strerror}") from exc
    counts = Counter(bucket_key(it.bucket) for it in dataset)
    spec = dataset.spec.to_dict() if dataset.spec is not None else None
    manifest = {
        "name": dataset.name,
        "seed": dataset.seed,
        "lines": len(dataset),
        "counts": dict(sorted(counts.items())),
        "config_hash": digest({"mix": spec, "export": cfg.to_dict()}),
        "file": out_path.name,
        "file_sha256": sha256_text(text),
    }
    if manifest_path is False:  # caller embeds the manifest elsewhere
        return manifest
    mpath = Path(manifest_path) if manifest_path else out_path.with_name(out_path.stem + ".manifest.json")
    mpath.write_bytes((dumps(manifest, indent=2) + "\n").encode("utf-8"))
    return manifest


def read_dataset_jsonl(path) -> list[QAItem]:
    """Items back from an exported file; errors carry the 1-based line number."""
    items = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                items.append(QAItem.from_dict(rec["meta"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{n}: {exc}") from exc
    return items


# -- statistics ------------------------------------------------------------------


@dataclass
class StatsReport:
    total: int = 0
    buckets: dict = field(default_factory=dict)
    per_format: dict = field(default_factory=dict)
    letters: dict = field(default_factory=lambda: dict.fromkeys(LETTERS, 0))
    numeric: dict = field(default_factory=dict)
    scenes: int = 0
    trajectories: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def table(self) -> str:
        rows = [f"{'bucket':<36}{'count':>8}{'share':>9}"]
        for k, v in self.buckets.items():
            rows.append(f"{k:<36}{v['count']:>8}{v['fraction'] * 100:>8.2f}%")
        rows.append(f"{'total':<36}{self.total:>8}")
        rows.append("letters: " + "  ".join(f"{k}={v}" for k, v in self.letters.items()))
        rows.append(f"scenes: {self.scenes}  trajectories: {self.trajectories}")
        for k, v in self.numeric.items():
            rows.append(f"{k}: n={v['count']} min={v['min']} median={v['median']} max={v['max']}")
        return "\n".join(rows)


def stats(dataset) -> StatsReport:
    items = list(dataset)
    rep = StatsReport(total=len(items))
    if not items:
        return rep
    counts = Counter(bucket_key(it.bucket) for it in items)
    rep.buckets = {k: {"count": n, "fraction": q(n / len(items))} for k, n in sorted(counts.items())}
    rep.per_format = dict(sorted(Counter(it.format for it in items).items()))
    for it in items:
        if it.format == MC:
            rep.letters[it.correct_letter] += 1
    values = defaultdict(list)
    for it in items:
        if it.qtype in NUMERIC_TYPES and it.format == OE:
            values[it.qtype].append(float(it.provenance.value))
    rep.numeric = {t: {"count": len(v), "min": q(min(v)), "max": q(max(v)), "mean": q(statistics.fmean(v)),
                       "median": q(statistics.median(v))} for t, v in sorted(values.items())}
    rep.scenes = len({it.provenance.scene_id for it in items})
    rep.trajectories = len({it.provenance.trajectory_id for it in items})
    return rep
