"""Break down why appearance-order items fail the uniform-subsample check.

    python3 scripts/measure_subsample.py RUN_DIR [--frames 64] [--dataset FILE]
"""

import argparse
from collections import Counter
from pathlib import Path

from spatialsim.oracle import sample_indices, subsample_check
from spatialsim.pipeline import load_artifacts, read_items_any


def first_sampled(ann, keep, threshold):
    cats = {}
    for i in keep:
        ob = ann.observations[i]
        for oid, frac in ob.visible:
            if frac >= threshold:
                cats.setdefault(oid, ob.frame_index)
    return cats


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("run_dir")
    ap.add_argument("--dataset")
    ap.add_argument("--frames", type=int, default=64)
    args = ap.parse_args()
    run = load_artifacts(args.run_dir)
    items = read_items_any(args.dataset or Path(args.run_dir) / "dataset.jsonl")
    ao = [it for it in items if it.qtype == "appearance_order"]
    why = Counter()
    strides = []
    for it in ao:
        tid = it.provenance.trajectory_id
        ann, traj = run.annotations[tid], run.trajectories[tid]
        scene = run.scenes[ann.scene_id]
        n = len(ann.observations)
        strides.append((n - 1) / (args.frames - 1))
        if subsample_check(it, scene, traj, ann, args.frames):
            why["pass"] += 1
            continue
        keep = sorted(set(sample_indices(n, args.frames)))
        seen = first_sampled(ann, keep, ann.salience_area_fraction)
        cat = {o.id: o.category for o in scene.objects}
        firsts = {}
        for oid, f in seen.items():
            firsts[cat[oid]] = min(f, firsts.get(cat[oid], f))
        choices = it.provenance.params["choices"]
        if any(c not in firsts for c in choices):
            why["category never salient in sampled frames"] += 1
        else:
            why["order changed"] += 1
    print(f"{len(ao)} appearance-order items, {args.frames} sampled frames")
    print(f"stride: min {min(strides):.1f} median {sorted(strides)[len(strides) // 2]:.1f} max {max(strides):.1f}")
    for k, v in why.most_common():
        print(f"  {k}: {v} ({v / len(ao):.1%})")


if __name__ == "__main__":
    main()
