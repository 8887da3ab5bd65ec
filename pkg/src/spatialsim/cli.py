"""Command-line entry point: ``spatialsim <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 validation
mismatch, 3 I/O failure or missing artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .canonical import dumps
from .errors import SpatialSimError
from .mixer import (ExportConfig, MixSpec, assemble_mix, builtin_mix, export_jsonl, stats)

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _set_pair(text: str):
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    node: dict = {}
    cur = node
    parts = key.split(".")
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = value
    return node


def _mix_spec(args, seed: int) -> MixSpec:
    if getattr(args, "spec", None):
        d = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        d.setdefault("seed", seed)
        if args.total is not None:
            d["total"] = args.total
        return MixSpec.from_dict(d)
    return builtin_mix(args.mix, args.total if args.total is not None else 1000, seed)


def _write_items(items, path) -> None:
    text = "".join(it.dumps() + "\n" for it in items)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _emit(obj, as_json: bool = True) -> None:
    print(dumps(obj, indent=2) if as_json else obj)


# -- subcommands -----------------------------------------------------------------


def cmd_gen(args) -> int:
    from .pipeline import cmd_gen as run, merge, resolve_config

    over: dict = {"seed": args.seed} if args.seed is not None else {}
    for key, flag in (("scene_count", args.scenes), ("trajectories_per_scene", args.trajectories),
                      ("out_dir", args.out), ("jobs", args.jobs)):
        if flag is not None:
            over[key] = flag
    if args.mix is not None or args.total is not None:
        over["mix"] = {k: v for k, v in (("name", args.mix), ("total", args.total)) if v is not None}
    for pair in args.set or ():
        over = merge(over, pair)
    try:
        cfg = resolve_config(args.config, over)
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"bad configuration: {exc}") from exc

    def progress(done, total):
        if not args.quiet:
            print(f"\rscenes {done}/{total}", end="" if done < total else "\n", file=sys.stderr)

    manifest = run(cfg, progress)
    _emit({"out_dir": cfg.out_dir, "counts": manifest["counts"], "config_hash": manifest["config_hash"]})
    return EXIT_OK


def cmd_qa(args) -> int:
    from .pipeline import qa_from_docs
    from .qa.gates import QualityConfig

    quality = QualityConfig()
    if args.quality:
        quality = QualityConfig.from_dict(json.loads(Path(args.quality).read_text(encoding="utf-8")))
    spec = _mix_spec(args, args.seed) if (args.mix or args.spec) else None
    manifest = qa_from_docs(args.docs, args.out, quality, args.seed, spec)
    _emit({"out_dir": args.out, "counts": manifest["counts"]})
    return EXIT_OK


def cmd_mix(args) -> int:
    from .pipeline import read_items_any

    pool = read_items_any(args.pool)
    if args.mix is None and args.spec is None:
        raise UsageError("give --mix NAME or --spec FILE")
    dataset = assemble_mix(pool, _mix_spec(args, args.seed))
    _write_items(dataset, args.out)
    _emit({"out": args.out, "items": len(dataset), "name": dataset.name})
    return EXIT_OK


def cmd_export(args) -> int:
    from .mixer import Dataset
    from .pipeline import read_items_any

    items = read_items_any(args.items)
    cfg = ExportConfig(mc_target=args.mc_target)
    manifest = export_jsonl(Dataset(Path(args.items).stem, args.seed, tuple(items)), cfg, args.out)
    _emit(manifest)
    return EXIT_OK


def cmd_stats(args) -> int:
    from .pipeline import read_items_any

    rep = stats(read_items_any(args.file))
    if args.json:
        _emit(rep.to_dict())
    else:
        print(rep.table())
    return EXIT_OK


def cmd_validate(args) -> int:
    from .oracle import exit_code, roundtrip_report
    from .pipeline import load_artifacts, read_items_any

    run = load_artifacts(args.run_dir)
    ds_path = Path(args.dataset) if args.dataset else Path(args.run_dir) / "dataset.jsonl"
    items = read_items_any(ds_path)
    n = None if args.frames <= 0 else args.frames
    report = roundtrip_report(items, run.scenes, run.annotations, run.trajectories, n)
    if args.report:
        Path(args.report).write_text(dumps(report, indent=2) + "\n", encoding="utf-8")
    summary = {k: report[k] for k in ("items", "matches", "ok", "n_frames")}
    summary["per_type"] = {t: {"match_rate": round(r["match_rate"], 4),
                               "subsample_rate": None if r["subsample_rate"] is None else round(r["subsample_rate"], 4)}
                           for t, r in report["per_type"].items()}
    summary["mismatches"] = report["mismatches"][:20]
    summary["missing"] = report["missing"][:20]
    _emit(summary)
    return exit_code(report)


def cmd_render(args) -> int:
    from .pipeline import load_artifacts
    from .render import render_topdown

    run = load_artifacts(args.run_dir)
    if args.scene_id not in run.scenes:
        raise FileNotFoundError(f"scene {args.scene_id!r} not in {args.run_dir}")
    traj = None
    if args.trajectory:
        traj = run.trajectories.get(args.trajectory)
        if traj is None or traj.scene_id != args.scene_id:
            raise FileNotFoundError(f"trajectory {args.trajectory!r} of scene {args.scene_id!r} not found")
    svg = render_topdown(run.scenes[args.scene_id], traj)
    out = args.out or f"{args.scene_id}.svg"
    Path(out).write_text(svg, encoding="utf-8")
    _emit({"out": out})
    return EXIT_OK


def cmd_ingest_validate(args) -> int:
    from .ingest import validate_scene_doc

    bad = 0
    for path in args.docs:
        problems = validate_scene_doc(Path(path).read_bytes())
        bad += bool(problems)
        print(f"{path}: " + ("ok" if not problems else "; ".join(problems)))
    return EXIT_MISMATCH if bad else EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spatialsim", description="Synthetic spatial video QA generator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        sp.add_argument("--seed", type=int, default=None if name == "gen" else 0,
                        help="global seed" + (" (overrides config)" if name == "gen" else ""))
        return sp

    g = add("gen", cmd_gen, "run the full pipeline")
    g.add_argument("--config", help="TOML or JSON config file")
    g.add_argument("--scenes", type=int)
    g.add_argument("--trajectories", type=int)
    g.add_argument("--mix")
    g.add_argument("--total", type=int)
    g.add_argument("--out")
    g.add_argument("--jobs", type=int)
    g.add_argument("--set", type=_set_pair, action="append", metavar="KEY=VALUE",
                   help="dotted config override, e.g. quality.min_pair_distance=0.6")
    g.add_argument("--quiet", action="store_true")

    qa = add("qa", cmd_qa, "generate QA from ingested scene documents")
    qa.add_argument("docs", nargs="+")
    qa.add_argument("--out", required=True)
    qa.add_argument("--quality", help="JSON file of quality thresholds")
    qa.add_argument("--mix")
    qa.add_argument("--spec")
    qa.add_argument("--total", type=int)

    m = add("mix", cmd_mix, "sample a dataset from a QA pool")
    m.add_argument("pool")
    m.add_argument("--mix")
    m.add_argument("--spec", help="JSON mix spec with weights keyed '<qtype>/<oe|mc>'")
    m.add_argument("--total", type=int)
    m.add_argument("--out", required=True)

    e = add("export", cmd_export, "write conversation-format JSONL")
    e.add_argument("items")
    e.add_argument("--out", required=True)
    e.add_argument("--mc-target", choices=("letter", "text"), default="letter")

    s = add("stats", cmd_stats, "bucket and answer statistics")
    s.add_argument("file")
    s.add_argument("--json", action="store_true")

    v = add("validate", cmd_validate, "recompute every answer from the stored geometry")
    v.add_argument("run_dir")
    v.add_argument("--dataset")
    v.add_argument("--frames", type=int, default=64, help="subsample size; 0 disables the check")
    v.add_argument("--report")

    r = add("render-topdown", cmd_render, "SVG floor plan of one scene")
    r.add_argument("run_dir")
    r.add_argument("scene_id")
    r.add_argument("--trajectory")
    r.add_argument("--out")

    iv = add("ingest-validate", cmd_ingest_validate, "check scene documents against the schema")
    iv.add_argument("docs", nargs="+")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"spatialsim: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError, OSError) as exc:
        print(f"spatialsim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SpatialSimError as exc:
        print(f"spatialsim: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_MISMATCH if exc.code in ("SCHEMA_ERROR", "INVARIANT_ERROR") else EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"spatialsim: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
