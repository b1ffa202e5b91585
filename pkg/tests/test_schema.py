import json

import pytest

from procrew.schema import (
    DEFAULT_SCHEMA,
    ActionType,
    UnknownParamError,
    classify_param,
    load_schema_config,
    schema_lookup,
)

# Output arity golden: every action row with its mixture-output count.
EXPECTED_OUTPUTS = {
    "add": 1,
    "change_atmosphere": 0,
    "change_ph": 0,
    "change_pressure": 0,
    "change_temperature": 0,
    "chromatograph": 1,
    "concentrate": 1,
    "degas": 0,
    "distill": 1,
    "dry": 1,
    "extract": 1,
    "filter_solution": 2,
    "irradiate": 0,
    "make_solution": 1,
    "microwave": 0,
    "other_purification": 1,
    "partition": 2,
    "quench": 1,
    "recrystallize": 1,
    "sample": 1,
    "sonicate": 0,
    "triturate": 1,
    "wait": 0,
    "wash": 1,
    "yield_statement": 0,
}


def test_variant_count():
    assert len(ActionType) == 26  # 25 table rows + supplement_information
    assert ActionType.SUPPLEMENT_INFORMATION.value == "supplement_information"


def test_output_arity_golden():
    for name, arity in EXPECTED_OUTPUTS.items():
        schema = schema_lookup(ActionType(name))
        assert schema.outputs == arity, name


def test_wait_schema():
    schema = schema_lookup(ActionType.WAIT)
    assert schema.param_names() == ("time_period",)
    assert schema.group_of("time_period") == "necessary"
    assert schema.outputs == 0


def test_add_partition_golden():
    schema = schema_lookup(ActionType.ADD)
    assert set(schema.group("necessary")) == {"source", "target"}
    assert set(schema.group("optional")) == {"time_period", "method"}


def test_classify_param_examples():
    assert classify_param(ActionType.ADD, "source") == "necessary"
    assert classify_param(ActionType.ADD, "method") == "optional"
    with pytest.raises(UnknownParamError):
        classify_param(ActionType.WAIT, "apparatus")


def test_schema_lookup_total_and_pure():
    for action in ActionType:
        first = schema_lookup(action)
        second = schema_lookup(action)
        assert first == second
        names = first.param_names()
        assert len(names) == len(set(names))


def test_groups_partition_param_set():
    for action in ActionType:
        schema = schema_lookup(action)
        nec = set(schema.group("necessary"))
        opt = set(schema.group("optional"))
        assert nec | opt == set(schema.param_names())
        assert not nec & opt


def test_config_override(tmp_path):
    override = {"actions": {"add": {"necessary": ["source", "target", "time_period"], "optional": ["method"]}}}
    path = tmp_path / "schema.json"
    path.write_text(json.dumps(override))
    cfg = load_schema_config(str(path))
    assert cfg.schema_for(ActionType.ADD).group_of("time_period") == "necessary"
    # the default instance is untouched
    assert DEFAULT_SCHEMA.schema_for(ActionType.ADD).group_of("time_period") == "optional"


def test_config_override_rejects_new_actions(tmp_path):
    path = tmp_path / "schema.json"
    path.write_text(json.dumps({"actions": {"teleport": {"necessary": [], "optional": [], "outputs": 0}}}))
    with pytest.raises(ValueError, match="unknown actions"):
        load_schema_config(str(path))


def test_unit_canonicalization():
    assert DEFAULT_SCHEMA.canonicalize(120, "min") == (2.0, "h", True)
    assert DEFAULT_SCHEMA.canonicalize(60, "min") == (1.0, "h", True)
    value, unit, std = DEFAULT_SCHEMA.canonicalize(273.15, "K")
    assert (round(value, 9), unit, std) == (0.0, "°C", True)
    assert DEFAULT_SCHEMA.canonicalize(5, "furlong") == (5, "furlong", False)


def test_tolerance_default():
    assert DEFAULT_SCHEMA.quantity_rel_tol == 0.01
