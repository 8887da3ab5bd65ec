"""Per-bucket error of the builtin mixes at several dataset sizes.

    python3 scripts/mix_fidelity.py [--totals 1000 5000 25000]
"""

import argparse
from collections import Counter

from spatialsim.mixer import MC, OE, BUILTIN_MIXES, assemble_mix, bucket_key, builtin_mix
from spatialsim.qa.items import QTYPES, Provenance, QAItem


def synthetic_pool(per_bucket):
    items = []
    for qt in QTYPES:
        for k in range(per_bucket):
            prov = Provenance("s", "s_t0", (), 1.0)
            items.append(QAItem(f"s_t0:{qt}:{k:05d}:oe", qt, OE, "q?", "1", prov))
            items.append(QAItem(f"s_t0:{qt}:{k:05d}:mc", qt, MC, "q?", "1", prov, ("1", "2", "3", "4"), "A"))
    return items


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--totals", type=int, nargs="+", default=[1000, 5000, 25000])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    pool = synthetic_pool(max(args.totals))
    for name in BUILTIN_MIXES:
        for total in args.totals:
            spec = builtin_mix(name, total, args.seed)
            got = Counter(it.bucket for it in assemble_mix(pool, spec))
            errs = {b: 100 * (got[b] / total - w) for b, w in spec.weights.items()}
            worst = max(errs, key=lambda b: abs(errs[b]))
            print(f"{name:<14}{total:>7}  worst {bucket_key(worst):<34}{errs[worst]:+.4f} pp")


if __name__ == "__main__":
    main()
