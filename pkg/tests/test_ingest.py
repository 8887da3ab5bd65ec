import copy
import json
import warnings

import pytest

from spatialsim.errors import InvariantError, SchemaError
from spatialsim.ingest import dump_scene_doc, load_schema, parse_scene_doc, to_scene_doc, validate_scene_doc
from spatialsim.mixer import OE
from spatialsim.qa.generators import generate_candidates

from schema_fixtures import MUTATIONS, busy_frame


@pytest.fixture(scope="module")
def doc_text(world):
    return dump_scene_doc(world.scene, world.trajectories[0], world.annotations[0])


@pytest.fixture
def doc(doc_text):
    return json.loads(doc_text)


def test_roundtrip_byte_identical(world, doc_text):
    scene, traj, ann = parse_scene_doc(doc_text.encode("utf-8"))
    assert scene.dumps() == world.scene.dumps()
    assert traj.dumps() == world.trajectories[0].dumps()
    assert ann.dumps() == world.annotations[0].dumps()
    assert dump_scene_doc(scene, traj, ann) == doc_text


def test_ingested_doc_drives_qa(world, doc_text):
    scene, traj, ann = parse_scene_doc(doc_text)
    items, _ = generate_candidates(scene, traj, ann, seed=11)
    want = [i for i in world.open_ended if i.provenance.trajectory_id == traj.id]
    assert [i.dumps() for i in items] == [i.dumps() for i in want]
    assert all(i.format == OE for i in items)


def test_pixel_count_converted(doc):
    k = busy_frame(doc)
    v = doc["observations"]["frames"][k]["visible"][0]
    v.pop("area_fraction")
    v["pixel_count"] = 7834
    doc["observations"]["resolution"] = [680, 384]
    _, _, ann = parse_scene_doc(json.dumps(doc))
    assert dict(ann.observations[k].visible)[v["object_id"]] == pytest.approx(0.0300, abs=5e-5)


def test_unknown_fields_warn_only(doc):
    doc["scene"]["simulator"] = "external"
    doc["trajectory"]["poses"][0]["roll"] = 0.0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        parse_scene_doc(json.dumps(doc))
    text = " ".join(str(w.message) for w in caught)
    assert "$.scene.simulator" in text and "$.trajectory.poses[0].roll" in text


def test_invariant_errors_forwarded(doc):
    objs = doc["scene"]["objects"]
    twin = copy.deepcopy(next(o for o in objs if o["placement"] == "floor"))
    twin["id"] = max(o["id"] for o in objs) + 1
    objs.append(twin)
    with pytest.raises(InvariantError, match="INTERPENETRATION"):
        parse_scene_doc(json.dumps(doc))


def test_schema_file_is_valid_json_schema():
    import jsonschema
    jsonschema.Draft202012Validator.check_schema(load_schema())


@pytest.mark.parametrize("name,mutate,path", MUTATIONS, ids=[m[0] for m in MUTATIONS])
def test_schema_violation_names_path(doc, name, mutate, path):
    expected = path.format(busy=busy_frame(doc))
    mutate(doc)
    with pytest.raises(SchemaError) as e:
        parse_scene_doc(json.dumps(doc))
    assert e.value.code == "SCHEMA_ERROR"
    assert e.value.path == expected, str(e.value)
    assert validate_scene_doc(json.dumps(doc))[0].startswith("SCHEMA_ERROR")


def test_mutation_count():
    assert len(MUTATIONS) >= 20


def test_undecodable_input():
    with pytest.raises(SchemaError) as e:
        parse_scene_doc(b"\xff\xfe{")
    assert e.value.path == "$"
    with pytest.raises(SchemaError) as e:
        parse_scene_doc("{not json")
    assert e.value.path == "$"


def test_to_scene_doc_is_plain_json(world):
    d = to_scene_doc(world.scene, world.trajectories[1], world.annotations[1])
    assert json.loads(json.dumps(d)) == d
