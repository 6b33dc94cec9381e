import json

import pytest

from chaingen.vss_catalog import (
    AccessorSpec,
    Catalog,
    DuplicatePath,
    MalformedDocument,
    UnknownKind,
    VssEntry,
    flatten_catalog,
    format_prompt_line,
    parse_kb_lines,
    parse_vss_json,
)

HAZARD_TREE = json.dumps(
    {
        "Vehicle": {
            "type": "branch",
            "children": {
                "Body": {
                    "type": "branch",
                    "children": {
                        "Lights": {
                            "type": "branch",
                            "children": {
                                "Hazard": {
                                    "type": "actuator",
                                    "datatype": "boolean",
                                    "accessors": ["set_is_signaling(bool value)"],
                                }
                            },
                        }
                    },
                }
            },
        }
    }
)


def test_parse_hazard_leaf():
    catalog = parse_vss_json(HAZARD_TREE)
    assert len(catalog) == 1
    entry = catalog.entries[0]
    assert entry.path == "Vehicle.Body.Lights.Hazard"
    assert entry.kind == "actuator"
    assert [a.render() for a in entry.accessors] == ["set_is_signaling(bool value)"]
    assert entry.accessors[0].direction == "setter"


def test_parse_empty_tree():
    assert len(parse_vss_json("{}")) == 0


def test_parse_case_study_scale(case_catalog):
    assert len(case_catalog) == 64
    for entry in case_catalog:
        assert case_catalog.lookup(entry.path) is entry


def test_parse_rejects_bad_json():
    with pytest.raises(MalformedDocument):
        parse_vss_json("{not json")


def test_parse_rejects_non_object_root():
    with pytest.raises(MalformedDocument):
        parse_vss_json("[1, 2]")


def test_parse_rejects_unknown_kind():
    doc = json.dumps({"Vehicle": {"type": "branch", "children": {"X": {"type": "gadget"}}}})
    with pytest.raises(UnknownKind):
        parse_vss_json(doc)


def test_parse_rejects_whitespace_in_name():
    doc = json.dumps({"Veh icle": {"type": "sensor", "datatype": "float"}})
    with pytest.raises(MalformedDocument):
        parse_vss_json(doc)


def test_catalog_rejects_duplicate_paths():
    entry = VssEntry(path="Vehicle.Speed", kind="sensor")
    with pytest.raises(DuplicatePath):
        Catalog([entry, entry])


def test_actuator_requires_setter():
    with pytest.raises(ValueError):
        VssEntry(
            path="Vehicle.X",
            kind="actuator",
            accessors=(AccessorSpec(name="get_x", direction="getter"),),
        )


def test_flatten_hazard_line_with_empty_description():
    entry = VssEntry(
        path="Vehicle.Body.Lights.Hazard",
        kind="actuator",
        accessors=(AccessorSpec("set_is_signaling", "setter", "bool value"),),
    )
    line = flatten_catalog(Catalog([entry]))[0]
    assert line == "Vehicle.Body.Lights.Hazard,actuator,set_is_signaling(bool value),"


def test_flatten_empty_catalog():
    assert flatten_catalog(Catalog([])) == []


def test_flatten_line_count_and_uniqueness(case_catalog):
    lines = flatten_catalog(case_catalog)
    assert len(lines) == 64
    assert len(set(lines)) == 64
    assert not any("\n" in line for line in lines)


def test_flatten_sanitizes_descriptions():
    entry = VssEntry(path="Vehicle.X", kind="sensor", description="a, b\nc")
    line = flatten_catalog(Catalog([entry]))[0]
    assert "\n" not in line
    assert line.endswith(",a; b c")


def test_prompt_line_matches_csv_form(case_catalog):
    hazard = case_catalog.lookup("Vehicle.Body.Lights.Hazard")
    assert format_prompt_line(hazard) == (
        "Vehicle.Body.Lights.Hazard, actuator, set_is_signaling(bool value)"
    )


def test_prompt_line_synthesized_getter():
    doc = json.dumps({"Vehicle": {"type": "branch", "children": {"Speed": {"type": "sensor", "datatype": "float"}}}})
    entry = parse_vss_json(doc).entries[0]
    assert format_prompt_line(entry) == "Vehicle.Speed, sensor, get_speed()"


def test_prompt_line_joins_multiple_accessors(case_catalog):
    entry = case_catalog.lookup("Vehicle.Chassis.Acceleration.Longitudinal")
    assert format_prompt_line(entry) == (
        "Vehicle.Chassis.Acceleration.Longitudinal, actuator, "
        "set_longitudinal(float value); get_longitudinal()"
    )


def test_lookup_is_exact(case_catalog):
    assert case_catalog.lookup("Vehicle.Body.Lights.Hazard") is not None
    assert case_catalog.lookup("vehicle.body.lights.hazard") is None
    assert case_catalog.lookup("Vehicle.Made.Up.Signal") is None


def test_kb_round_trip(case_catalog):
    rebuilt = parse_kb_lines(flatten_catalog(case_catalog))
    assert len(rebuilt) == len(case_catalog)
    for original in case_catalog:
        again = rebuilt.lookup(original.path)
        assert again is not None
        assert again.kind == original.kind
        assert [a.render() for a in again.accessors] == [a.render() for a in original.accessors]


def test_kb_line_splits_on_first_three_commas(case_catalog):
    # For comma-free accessor fields (the usual case), a plain split on the
    # first three commas recovers path, kind, and accessors directly.
    for line in flatten_catalog(case_catalog):
        entry = case_catalog.lookup(line.split(",", 1)[0])
        accessors = ";".join(a.render() for a in entry.accessors)
        if "," in accessors:
            continue
        path, kind, got_accessors = line.split(",", 3)[:3]
        assert (path, kind, got_accessors) == (entry.path, entry.kind, accessors)


def test_kb_round_trip_with_comma_in_signature():
    entry = VssEntry(
        path="Vehicle.X",
        kind="actuator",
        description="dual-channel setter",
        accessors=(AccessorSpec("set_x", "setter", "int a, int b"),),
    )
    rebuilt = parse_kb_lines(flatten_catalog(Catalog([entry])))
    assert rebuilt.lookup("Vehicle.X").accessors[0].param_signature == "int a, int b"


def test_iteration_preserves_source_order(case_catalog):
    paths = [e.path for e in case_catalog]
    assert paths[0] == "Vehicle.Speed"
    assert paths == sorted(paths, key=paths.index)
