import json
from collections import Counter
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from spatialsim.errors import InsufficientPool
from spatialsim.mixer import (BUILTIN_MIXES, MC, OE, Dataset, ExportConfig, MixSpec, assemble_mix, bucket_key,
                              bucket_sizes, builtin_mix, export_jsonl, export_lines, parse_bucket,
                              read_dataset_jsonl, stats)
from spatialsim.qa.items import QTYPES, Provenance, QAItem

GOLDEN = Path(__file__).parent / "golden"
PRE = "These are frames of a video."
MC_POST = "Answer with the option's letter from the given choices directly."
OE_POST = "Please answer the question using a single word or phrase."


def synthetic_pool(per_bucket: int, qtypes=QTYPES):
    items = []
    for qt in qtypes:
        for k in range(per_bucket):
            prov = Provenance(f"s{k % 7}", f"s{k % 7}_t0", (), 1.0)
            items.append(QAItem(f"t:{qt}:{k:05d}:oe", qt, OE, "q?", "1.0", prov))
            items.append(QAItem(f"t:{qt}:{k:05d}:mc", qt, MC, "q?", "1.0", prov, ("1.0", "2.0", "3.0", "4.0"), "A"))
    return items


def largest_remainder(weights, total):
    """Hamilton apportionment, written out independently."""
    keys = sorted(weights)
    quotas = [weights[k] * total for k in keys]
    base = [int(q // 1) for q in quotas]
    left = total - sum(base)
    ranked = sorted(range(len(keys)), key=lambda i: (base[i] - quotas[i], keys[i]))
    for i in ranked[:left]:
        base[i] += 1
    return dict(zip(keys, base))


def test_bucket_keys():
    assert parse_bucket("abs_dist/oe") == ("abs_dist", OE)
    assert bucket_key(("abs_dist", MC)) == "abs_dist/multiple_choice"
    with pytest.raises(ValueError):
        parse_bucket("nope/oe")


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=22).filter(lambda w: sum(w) > 0),
       st.integers(1, 100_000))
def test_bucket_sizes_sum_and_match_largest_remainder(raw, total):
    buckets = [(qt, f) for qt in QTYPES for f in (OE, MC)][: len(raw)]
    s = sum(raw)
    w = {b: x / s for b, x in zip(buckets, raw)}
    sizes = bucket_sizes(w, total)
    assert sum(sizes.values()) == total
    assert sizes == largest_remainder(w, total)
    for b in w:
        assert abs(sizes[b] - w[b] * total) < 1 + 1e-9


def test_three_q_total_three():
    ds = assemble_mix(synthetic_pool(2), builtin_mix("three_q", 3, 0))
    assert Counter(it.bucket for it in ds) == {("abs_dist", OE): 1, ("rel_dir_hard", MC): 1,
                                              ("appearance_order", MC): 1}


def test_vsi_baseline_abs_dist_share():
    sizes = bucket_sizes(builtin_mix("vsi_baseline", 25_000).weights, 25_000)
    # 16.9 of a 99.9 total
    assert sizes[("abs_dist", OE)] == round(25_000 * 16.9 / 99.9)
    assert sizes[("route_plan", MC)] == 0


def test_builtin_mixes_normalized():
    for name in BUILTIN_MIXES:
        m = builtin_mix(name, 100)
        assert sum(m.weights.values()) == pytest.approx(1.0)
    with pytest.raises(KeyError):
        builtin_mix("unknown")


def test_mix_spec_validation_and_roundtrip():
    with pytest.raises(ValueError):
        MixSpec("bad", 10, {("abs_dist", OE): 0.5})
    with pytest.raises(ValueError):
        MixSpec("bad", 0, {("abs_dist", OE): 1.0})
    spec = MixSpec.from_dict({"total": 10, "weights": {"abs_dist/oe": 2, "obj_count/mc": 2}, "normalize": True})
    assert spec.weights == {("abs_dist", OE): 0.5, ("obj_count", MC): 0.5}
    assert MixSpec.from_dict(spec.to_dict()) == spec
    assert MixSpec.from_dict({"mix": "three_q", "total": 9}).name == "three_q"


def test_insufficient_pool_names_bucket():
    with pytest.raises(InsufficientPool) as e:
        assemble_mix(synthetic_pool(2), builtin_mix("three_q", 30))
    assert e.value.bucket in {("abs_dist", OE), ("rel_dir_hard", MC), ("appearance_order", MC)}
    assert (e.value.have, e.value.need) == (2, 10)


def test_assembly_deterministic_unique_shuffled():
    pool = synthetic_pool(80)
    a = assemble_mix(pool, builtin_mix("vsi_baseline", 300, 4))
    b = assemble_mix(pool, builtin_mix("vsi_baseline", 300, 4))
    c = assemble_mix(pool, builtin_mix("vsi_baseline", 300, 5))
    assert [i.id for i in a] == [i.id for i in b] != [i.id for i in c]
    assert len({i.id for i in a}) == 300
    assert [i.bucket for i in a] != sorted(i.bucket for i in a)


def test_distribution_fidelity():
    pool = synthetic_pool(400)
    spec = builtin_mix("sims_vsi", 997)
    ds = assemble_mix(pool, spec)
    got = Counter(it.bucket for it in ds)
    for b, w in spec.weights.items():
        assert abs(got[b] / len(ds) - w) <= 1 / 997 + 1e-9


def test_export_prompts_and_turns(world, tmp_path):
    items = [i for i in world.pool[:60]]
    out = tmp_path / "d.jsonl"
    manifest = export_jsonl(Dataset("t", 0, tuple(items)), ExportConfig(), out)
    lines = out.read_text("utf-8").splitlines()
    assert len(lines) == manifest["lines"] == 60
    for line, it in zip(lines, items):
        rec = json.loads(line)
        human, gpt = rec["conversations"]
        assert human["value"].startswith(PRE + "\n" + it.question + "\n")
        if it.format == MC:
            assert human["value"].endswith(MC_POST)
            for k, c in zip("ABCD", it.choices):
                assert f"\n{k}. {c}\n" in human["value"]
            assert gpt["value"] == it.correct_letter
        else:
            assert human["value"].endswith(OE_POST)
            assert gpt["value"] == it.answer
        assert rec["video"] == f"videos/{it.provenance.scene_id}/{it.provenance.trajectory_id}.mp4"
    assert json.loads((tmp_path / "d.manifest.json").read_text())["file_sha256"] == manifest["file_sha256"]
    assert [i.dumps() for i in read_dataset_jsonl(out)] == [i.dumps() for i in items]


def test_export_text_target():
    item = synthetic_pool(1, ["obj_count"])[1]
    rec = json.loads(export_lines([item], ExportConfig(mc_target="text")))
    assert rec["conversations"][1]["value"] == "1.0"
    with pytest.raises(ValueError):
        ExportConfig(mc_target="both")


def test_export_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        export_jsonl(Dataset("e", 0, ()), ExportConfig(), tmp_path / "x.jsonl")


def test_export_golden():
    prov = Provenance("scene_1", "scene_1_t0", (3, 4), 2.0, {"object1": "sofa", "object2": "bed"}, {})
    oe_item = QAItem("scene_1_t0:abs_dist:00:oe", "abs_dist", OE,
                     "Measuring from the closest point of each object, what is the direct distance between "
                     "the sofa and the bed (in meters)?", "2.0", prov)
    mc_item = QAItem("scene_1_t0:abs_dist:00:mc", "abs_dist", MC, oe_item.question, "2.0", prov,
                     ("1.1", "2.0", "3.1", "4.8"), "B")
    text = export_lines([oe_item, mc_item])
    assert text == (GOLDEN / "export.jsonl").read_text("utf-8")


def test_stats_report(world):
    rep = stats(world.pool)
    mc = sum(1 for i in world.pool if i.format == MC)
    assert sum(rep.letters.values()) == mc
    assert sum(v["count"] for v in rep.buckets.values()) == len(world.pool)
    assert rep.scenes == 1 and rep.trajectories == 2
    assert "total" in rep.table()
    empty = stats([])
    assert empty.total == 0 and empty.buckets == {} and set(empty.letters.values()) == {0}
