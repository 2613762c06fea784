import json

import pytest

from onlinepi.model import (
    InstanceParseError,
    InstanceValidationError,
    generate_random,
    instance_digest,
    load_instance,
    read_instance,
    save_instance,
    write_instance,
)


def test_counterexample_round_trip(counterexample):
    text = save_instance(counterexample)
    loaded = load_instance(text)
    assert loaded == counterexample
    assert loaded.n == 3 and loaded.discount == 0.9
    assert save_instance(loaded) == text


def test_random_round_trip_is_bit_exact():
    instance = generate_random(6, 3, 3, cost_range=(-1.0, 2.5), seed=7)
    text = save_instance(instance)
    assert save_instance(load_instance(text)) == text
    assert load_instance(text) == instance


def test_canonical_field_order(counterexample):
    doc = json.loads(save_instance(counterexample))
    assert list(doc) == ["n", "discount", "states"]
    assert list(doc["states"][0]) == ["id", "actions"]
    assert list(doc["states"][0]["actions"][0]) == ["label", "transitions", "costs"]


@pytest.mark.parametrize("text", ["", "   \n"])
def test_empty_text(text):
    with pytest.raises(InstanceParseError) as e:
        load_instance(text)
    assert e.value.location == "line 1, column 1"


def test_syntax_error_location():
    with pytest.raises(InstanceParseError) as e:
        load_instance('{"n": 1,\n "discount": }')
    assert e.value.location.startswith("line 2")


def test_unknown_field_is_named(counterexample):
    doc = json.loads(save_instance(counterexample))
    doc["states"][1]["actions"][0]["comment"] = "not allowed"
    with pytest.raises(InstanceParseError) as e:
        load_instance(json.dumps(doc))
    assert "comment" in str(e.value)
    assert e.value.location == "states[1].actions[0]"


def test_missing_field(counterexample):
    doc = json.loads(save_instance(counterexample))
    del doc["discount"]
    with pytest.raises(InstanceParseError, match="discount"):
        load_instance(json.dumps(doc))


def test_wrong_type_path(counterexample):
    doc = json.loads(save_instance(counterexample))
    doc["states"][2]["actions"][0]["transitions"][0]["p"] = "one"
    with pytest.raises(InstanceParseError) as e:
        load_instance(json.dumps(doc))
    assert e.value.location == "states[2].actions[0].transitions[0].p"


def test_invalid_instance_is_rejected(counterexample):
    doc = json.loads(save_instance(counterexample))
    doc["states"][0]["actions"][0]["transitions"][0]["p"] = 0.98
    with pytest.raises(InstanceValidationError) as e:
        load_instance(json.dumps(doc))
    assert any("(x=1, u=to2)" in v for v in e.value.violations)


def test_digest(counterexample, tmp_path):
    digest = instance_digest(counterexample)
    assert len(digest) == 64
    path = tmp_path / "counterexample.json"
    write_instance(counterexample, path)
    assert instance_digest(read_instance(path)) == digest
    assert instance_digest(generate_random(3, 2, 2, seed=1)) != digest
