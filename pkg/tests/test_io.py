import json

import pytest
from hypothesis import given, settings

from conftest import random_mdps
from lstar_mdp import InvalidMdpError, MdpParseError, export_dot, isomorphic, load_mdp, parse_mdp, save_mdp, serialize_mdp
from lstar_mdp.io import mdp_to_dict


def test_coffee_roundtrip(coffee, tmp_path):
    path = tmp_path / "coffee.json"
    save_mdp(coffee, path)
    again = load_mdp(path)
    assert isomorphic(coffee, again)
    assert serialize_mdp(again) == serialize_mdp(coffee)


@settings(max_examples=30, deadline=None)
@given(random_mdps())
def test_serialize_roundtrip(m):
    assert isomorphic(parse_mdp(serialize_mdp(m)), m)


def test_parse_reports_json_line():
    with pytest.raises(MdpParseError) as info:
        parse_mdp('{\n  "inputs": [\n  oops\n}')
    assert info.value.line == 3


def test_parse_reports_field(coffee):
    doc = mdp_to_dict(coffee)
    doc["transitions"][0]["to"] = {"nowhere": 1.0}
    with pytest.raises(MdpParseError) as info:
        parse_mdp(json.dumps(doc))
    assert info.value.field == "transitions[0].to"
    doc = mdp_to_dict(coffee)
    del doc["inputs"]
    with pytest.raises(MdpParseError, match="inputs"):
        parse_mdp(json.dumps(doc))


def test_parse_checks_invariants(coffee):
    doc = mdp_to_dict(coffee)
    doc["transitions"][0]["to"] = {doc["states"][0]["id"]: 0.5}
    with pytest.raises(InvalidMdpError):
        parse_mdp(json.dumps(doc))
    assert parse_mdp(json.dumps(doc), check=False).n_states == 3


def test_export_dot(coffee):
    dot = export_dot(coffee)
    assert dot.startswith("digraph mdp {")
    assert '[label="but:0.8"]' in dot
    assert dot.count("->") == 1 + sum(len(d) for row in coffee.transitions for d in row.values())
