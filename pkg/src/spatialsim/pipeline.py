"""End-to-end run: scenes -> trajectories -> annotations -> QA pool -> mix -> export."""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .canonical import digest, dumps, sha256_text
from .errors import SpatialSimError
from .mixer import ExportConfig, MixSpec, assemble_mix, builtin_mix, export_jsonl
from .nav_trace import CameraConfig, Speeds, Trajectory, build_navgrid, make_trajectories
from .observer import DenseAnnotations, VisibilityConfig, annotate_trajectory
from .qa.choices import finalize_pool
from .qa.gates import QualityConfig
from .qa.generators import generate_candidates
from .qa.items import QTYPES, QAItem
from .scene_forge import Scene, SceneParams, generate_scene

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

ENV_PREFIX = "SIMSV_"


class StageError(SpatialSimError):
    code = "STAGE_ERROR"

    def __init__(self, stage: str, artifact: str, cause: Exception):
        super().__init__(f"stage {stage} failed on {artifact}: {getattr(cause, 'code', type(cause).__name__)}: {cause}")
        self.stage, self.artifact, self.cause = stage, artifact, cause


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    scene_count: int = 50
    trajectories_per_scene: int = 2
    out_dir: str = "out"
    jobs: int = 1
    qtypes: tuple = QTYPES
    scene: SceneParams = field(default_factory=SceneParams)
    camera: CameraConfig = field(default_factory=CameraConfig)
    speeds: Speeds = field(default_factory=Speeds)
    visibility: VisibilityConfig = field(default_factory=VisibilityConfig)
    quality: QualityConfig = field(default_factory=QualityConfig)
    mix: dict = field(default_factory=lambda: {"name": "vsi_baseline", "total": 1000})
    export: ExportConfig = field(default_factory=ExportConfig)

    def __post_init__(self):
        if self.scene_count < 1:
            raise ValueError("scene_count must be >= 1")
        if self.trajectories_per_scene < 1:
            raise ValueError("trajectories_per_scene must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        unknown = set(self.qtypes) - set(QTYPES)
        if unknown:
            raise ValueError(f"unknown qtypes {sorted(unknown)}")
        self.scene.validate()
        self.mix_spec()

    def mix_spec(self) -> MixSpec:
        m = dict(self.mix)
        total = int(m.get("total", 1000))
        if "weights" in m:
            return MixSpec.from_dict({"name": m.get("name", "custom"), "total": total, "seed": self.seed,
                                      "weights": m["weights"], "normalize": m.get("normalize", False)})
        return builtin_mix(m.get("name", "vsi_baseline"), total, self.seed)

    def scene_seed(self, i: int) -> int:
        return self.seed * 1_000_003 + i

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "scene_count": self.scene_count,
            "trajectories_per_scene": self.trajectories_per_scene, "out_dir": self.out_dir,
            "jobs": self.jobs, "qtypes": list(self.qtypes), "scene": self.scene.to_dict(),
            "camera": self.camera.to_dict(), "speeds": asdict(self.speeds),
            "visibility": self.visibility.to_dict(), "quality": self.quality.to_dict(),
            "mix": dict(self.mix), "export": self.export.to_dict(),
        }

    def content_hash(self) -> str:
        """Hash of everything that influences outputs (not out_dir or jobs)."""
        d = self.to_dict()
        d.pop("out_dir")
        d.pop("jobs")
        return digest(d)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        kw = {k: d[k] for k in ("seed", "scene_count", "trajectories_per_scene", "out_dir", "jobs") if k in d}
        if "qtypes" in d:
            kw["qtypes"] = tuple(d["qtypes"])
        if "scene" in d:
            kw["scene"] = SceneParams.from_dict(d["scene"])
        if "camera" in d:
            kw["camera"] = CameraConfig.from_dict({**CameraConfig().to_dict(), **d["camera"]})
        if "speeds" in d:
            kw["speeds"] = Speeds(**d["speeds"])
        if "visibility" in d:
            kw["visibility"] = VisibilityConfig(**d["visibility"])
        if "quality" in d:
            kw["quality"] = QualityConfig.from_dict(d["quality"])
        if "mix" in d:
            kw["mix"] = dict(d["mix"])
        if "export" in d:
            kw["export"] = ExportConfig.from_dict(d["export"])
        return cls(**kw)


def read_config_file(path) -> dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return json.loads(text)
    return tomllib.loads(text)


def _coerce(raw: str):
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def env_overrides(environ=None) -> dict:
    """SIMSV_SEED=3 -> {"seed": 3}; SIMSV_MIX__TOTAL=500 -> {"mix": {"total": 500}}."""
    environ = os.environ if environ is None else environ
    out: dict = {}
    for key, raw in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        parts = key[len(ENV_PREFIX):].lower().split("__")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = _coerce(raw)
    return out


def merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def resolve_config(path=None, overrides: dict | None = None, environ=None) -> PipelineConfig:
    """defaults < config file < SIMSV_* environment < explicit overrides."""
    d: dict = {}
    if path is not None:
        d = read_config_file(path)
    d = merge(d, env_overrides(environ))
    d = merge(d, overrides or {})
    return PipelineConfig.from_dict(d)


# -- per-scene work --------------------------------------------------------------


@dataclass
class SceneBundle:
    scene: Scene
    trajectories: list
    annotations: list
    items: list
    rejections: list


def run_scene(cfg: PipelineConfig, index: int) -> SceneBundle:
    seed = cfg.scene_seed(index)
    params = SceneParams.from_dict({**cfg.scene.to_dict(), "seed": seed})
    label = f"scene #{index} (seed {seed})"
    try:
        scene = generate_scene(params)
    except Exception as exc:
        raise StageError("scene_forge", label, exc) from exc
    try:
        grid = build_navgrid(scene)
        trajs = make_trajectories(scene, cfg.trajectories_per_scene, seed, cfg.camera, cfg.speeds, grid)
    except Exception as exc:
        raise StageError("nav_trace", scene.id, exc) from exc
    anns, items, rejections = [], [], []
    for tr in trajs:
        try:
            ann = annotate_trajectory(scene, tr, cfg.visibility)
        except Exception as exc:
            raise StageError("observer", tr.id, exc) from exc
        try:
            its, rej = generate_candidates(scene, tr, ann, cfg.quality, cfg.seed, cfg.qtypes, grid)
        except Exception as exc:
            raise StageError("qa_engine", tr.id, exc) from exc
        anns.append(ann)
        items += its
        rejections += [r.to_dict() for r in rej]
    return SceneBundle(scene, trajs, anns, items, rejections)


def _run_scene_args(args):
    return run_scene(*args)


def run_scenes(cfg: PipelineConfig, progress=None) -> list[SceneBundle]:
    jobs = [(cfg, i) for i in range(cfg.scene_count)]
    if cfg.jobs == 1:
        out = []
        for a in jobs:
            out.append(run_scene(*a))
            if progress:
                progress(len(out), len(jobs))
        return out
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        return list(pool.map(_run_scene_args, jobs, chunksize=1))


# -- writing ---------------------------------------------------------------------


def _write(path: Path, text: str, files: dict, root: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_bytes(text.encode("utf-8"))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    files[path.relative_to(root).as_posix()] = sha256_text(text)


def jsonl(rows) -> str:
    return "".join(dumps(r) + "\n" for r in rows)


def write_artifacts(root: Path, bundles, files: dict) -> None:
    for b in bundles:
        _write(root / "scenes" / f"{b.scene.id}.json", b.scene.dumps() + "\n", files, root)
        for tr, ann in zip(b.trajectories, b.annotations):
            _write(root / "trajectories" / f"{tr.id}.json", tr.dumps() + "\n", files, root)
            _write(root / "annotations" / f"{tr.id}.json", ann.dumps() + "\n", files, root)


def finish(root: Path, cfg_dict: dict, config_hash: str, seed: int, spec: MixSpec, export: ExportConfig,
           open_ended: list, rejections: list, files: dict, extra: dict | None = None) -> dict:
    """Pool finalization, mix, export, manifest: the serial tail of every run."""
    pool, mc_rej = finalize_pool(open_ended, seed)
    rejections = rejections + mc_rej
    _write(root / "qa_pool" / "pool.jsonl", "".join(it.dumps() + "\n" for it in pool), files, root)
    _write(root / "rejections.jsonl", jsonl(rejections), files, root)
    dataset = assemble_mix(pool, spec)
    export_manifest = export_jsonl(dataset, export, root / "dataset.jsonl", manifest_path=False)
    files["dataset.jsonl"] = export_manifest["file_sha256"]
    pool_counts: dict = {}
    for it in pool:
        k = f"{it.qtype}/{it.format}"
        pool_counts[k] = pool_counts.get(k, 0) + 1
    manifest = {
        "tool": "spatialsim",
        "version": __version__,
        "seed": seed,
        "config": cfg_dict,
        "config_hash": config_hash,
        "counts": {"pool": len(pool), "rejections": len(rejections), "dataset": len(dataset), **(extra or {})},
        "pool_counts": dict(sorted(pool_counts.items())),
        "dataset": export_manifest,
        "files": dict(sorted(files.items())),
    }
    (root / "manifest.json").write_bytes((dumps(manifest, indent=2) + "\n").encode("utf-8"))
    return manifest


def cmd_gen(cfg: PipelineConfig, progress=None) -> dict:
    root = Path(cfg.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    bundles = run_scenes(cfg, progress)
    files: dict = {}
    write_artifacts(root, bundles, files)
    items = [it for b in bundles for it in b.items]
    rejections = [r for b in bundles for r in b.rejections]
    cfg_dict = cfg.to_dict()
    cfg_dict.pop("out_dir")
    cfg_dict.pop("jobs")
    extra = {"scenes": len(bundles), "trajectories": sum(len(b.trajectories) for b in bundles)}
    return finish(root, cfg_dict, cfg.content_hash(), cfg.seed, cfg.mix_spec(), cfg.export,
                  items, rejections, files, extra)


# -- reading a run back ----------------------------------------------------------


@dataclass
class RunArtifacts:
    scenes: dict
    trajectories: dict
    annotations: dict


def load_artifacts(root) -> RunArtifacts:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"no run directory at {root}")

    def load(sub, cls):
        out = {}
        for p in sorted((root / sub).glob("*.json")):
            try:
                obj = cls.from_dict(json.loads(p.read_text(encoding="utf-8")))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{p}: {exc}") from exc
            out[obj.id if hasattr(obj, "id") else obj.trajectory_id] = obj
        return out

    return RunArtifacts(load("scenes", Scene), load("trajectories", Trajectory),
                        load("annotations", DenseAnnotations))


def qa_from_docs(doc_paths, out_dir, quality: QualityConfig = QualityConfig(), seed: int = 0,
                 mix: MixSpec | None = None, export: ExportConfig = ExportConfig(), qtypes=QTYPES) -> dict:
    """Run QA generation downstream of externally produced scene documents."""
    from .ingest import parse_scene_doc

    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    bundles, files = [], {}
    for path in doc_paths:
        scene, traj, ann = parse_scene_doc(Path(path).read_bytes())
        grid = build_navgrid(scene)
        its, rej = generate_candidates(scene, traj, ann, quality, seed, qtypes, grid)
        bundles.append(SceneBundle(scene, [traj], [ann], its, [r.to_dict() for r in rej]))
    write_artifacts(root, bundles, files)
    items = [it for b in bundles for it in b.items]
    rejections = [r for b in bundles for r in b.rejections]
    spec = mix
    if spec is None:  # export the whole pool
        pool, _ = finalize_pool(items, seed)
        if not pool:
            raise ValueError("no QA items survived the quality gates")
        weights = {}
        for it in pool:
            weights[it.bucket] = weights.get(it.bucket, 0) + 1
        spec = MixSpec("pool", len(pool), {k: v / len(pool) for k, v in weights.items()}, seed)
    cfg_dict = {"docs": [Path(p).name for p in doc_paths], "quality": quality.to_dict(), "seed": seed,
                "mix": spec.to_dict(), "export": export.to_dict()}
    return finish(root, cfg_dict, digest(cfg_dict), seed, spec, export, items, rejections, files,
                  {"scenes": len(bundles), "trajectories": len(bundles)})


def read_items_any(path) -> list[QAItem]:
    """Items from pool-format or exported conversation-format JSONL."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(QAItem.from_dict(rec["meta"] if "meta" in rec else rec))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{n}: {exc}") from exc
    return out
