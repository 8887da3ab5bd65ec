"""Per-format type counts of a finished run, with room_size relative to the rest.

    python3 scripts/dataset_shape.py RUN_DIR
"""

import argparse
import statistics
from collections import Counter
from pathlib import Path

from spatialsim.qa.items import FORMATS
from spatialsim.pipeline import read_items_any


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("run_dir")
    args = ap.parse_args()
    items = read_items_any(Path(args.run_dir) / "dataset.jsonl")
    print(f"{len(items)} items")
    for fmt in FORMATS:
        c = Counter(it.qtype for it in items if it.format == fmt)
        others = statistics.fmean(n for t, n in c.items() if t != "room_size")
        print(f"{fmt}: " + ", ".join(f"{t}={n}" for t, n in sorted(c.items())))
        print(f"  room_size / mean(other types) = {c.get('room_size', 0) / others:.4f}")


if __name__ == "__main__":
    main()
