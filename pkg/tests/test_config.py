import json

import pytest

from config import (
    ExperimentSpec,
    build_spec,
    load_config,
    parse_float_list,
    parse_int_list,
    parse_r0_list,
)
from constants import DEFAULT_RUNS, DEFAULT_SEED


def test_defaults():
    spec = ExperimentSpec(command="sweep")
    assert spec.runs == DEFAULT_RUNS
    assert spec.seed == DEFAULT_SEED
    assert [e.name for e in spec.resolved_estimators()] == ["schoute"]


def test_list_parsers():
    assert parse_int_list("1,2, 10") == (1, 2, 10)
    assert parse_float_list("1.5,20") == (1.5, 20.0)
    assert parse_r0_list("1,n,100") == (1, "N", 100)


def test_initial_frames_resolve_n():
    spec = ExperimentSpec(command="sweep", r0=(1, "N", 10))
    assert spec.initial_frames(10) == (1, 10)
    assert spec.initial_frames(0) == (1, 10)


def test_b_flag_applies_to_plain_ae2():
    spec = ExperimentSpec(command="sweep", estimators=("ae2", "ae2(b=3)", "schoute"), b=2.0)
    assert [e.label for e in spec.resolved_estimators()] == ["ae2(b=2)", "ae2(b=3)", "schoute"]


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_list": ()},
        {"n_list": (-1,)},
        {"r0": (0,)},
        {"r0": ("M",)},
        {"runs": 0},
        {"seed": -1},
        {"seed": 2**64},
        {"workers": 0},
        {"estimators": ("bogus",)},
    ],
)
def test_validation(kwargs):
    with pytest.raises(ValueError):
        ExperimentSpec(command="sweep", **kwargs)


def test_precedence(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"runs": 50, "seed": 3, "n_list": [5, 6], "r0": ["N", 2]}))
    config = load_config(path)
    spec = build_spec(
        "sweep",
        config=config,
        overrides={"seed": 9, "out": None},
        defaults={"runs": 10, "seed": 1},
    )
    assert spec.runs == 50
    assert spec.seed == 9
    assert spec.n_list == (5, 6)
    assert spec.r0 == ("N", 2)


def test_unknown_config_key(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"runz": 5}))
    with pytest.raises(ValueError, match="runz"):
        load_config(path)


def test_config_must_be_object(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text("[1, 2]")
    with pytest.raises(ValueError):
        load_config(path)


def test_trajectory_needs_enough_runs():
    with pytest.raises(ValueError, match="at least 100 runs"):
        ExperimentSpec(command="trajectory", runs=50)
    assert ExperimentSpec(command="trajectory", runs=100).runs == 100
    assert ExperimentSpec(command="sweep", runs=50).runs == 50
