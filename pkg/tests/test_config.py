from decimal import Decimal

import pytest

from bundle_covering.config import RunConfig, build_config, load_config_file
from bundle_covering.errors import ConfigError


def test_defaults() -> None:
    config = build_config({}, {"jobs": 1})
    assert config.subcommand == "verify"
    assert config.mode == "full"
    assert config.r_u == "1" and config.r_s == "1.2"
    assert str(config.subdivision) == "4,100,50,50"
    assert [m.name for m in config.maps] == ["cap"]


def test_flags_override_file_values() -> None:
    file_data = {"scheme": "1,1,1,1", "params": {"mu": "1/10"}, "enclosure": {"radius": 3}}
    config = build_config(
        file_data,
        {"scheme": "2,2,2,2", "params": {"beta": "0:1"}, "enclosure": {"refine_steps": 1, "grid": None}},
    )
    assert config.scheme == "2,2,2,2"
    assert config.params == {"mu": "1/10", "beta": "0:1"}
    assert config.enclosure.radius == "3"
    assert config.enclosure.refine_steps == 1


def test_decimal_numbers_stay_exact(tmp_path) -> None:
    path = tmp_path / "run.json"
    path.write_text('{"r_s": 1.2, "maps": ["toy"], "params": {"mu": 0.1}}')
    data = load_config_file(path)
    assert data["r_s"] == Decimal("1.2")
    config = build_config(data)
    assert config.r_s == "1.2"
    assert config.params["mu"] == "0.1"


def test_float_numbers_are_refused() -> None:
    with pytest.raises(ConfigError, match="r_s"):
        build_config({"r_s": 1.2})


@pytest.mark.parametrize(
    "data",
    [
        {"maps": [{"name": "henon"}]},
        {"maps": ["cap", "cap"]},
        {"scheme": "4,100"},
        {"r_s": "-1"},
        {"subcommand": "nhim-k", "C": "2"},
        {"maps": ["custom"]},
        {"unknown_key": 1},
        {"map": {"x_out": "2*x"}, "maps": ["custom"]},
    ],
)
def test_invalid_configurations(data) -> None:
    with pytest.raises(ConfigError):
        build_config(data)


def test_no_unstable_direction() -> None:
    assert build_config({"r_u": "none"}).r_u is None


def test_sequence_of_maps() -> None:
    config = build_config({"mode": "sequence", "maps": ["cap", {"name": "cap", "params": {"linear_coeff": "16/5"}}]})
    assert config.member_params(config.maps[1]) == {"linear_coeff": "16/5"}


def test_dump_round_trip() -> None:
    config = build_config({"subcommand": "nhim-k", "C": 100, "lambda": "0.5", "jobs": 2})
    dumped = config.dump()
    assert dumped["lambda"] == "0.5"
    assert RunConfig.model_validate(dumped).dump() == dumped


def test_jobs_from_environment(monkeypatch) -> None:
    monkeypatch.setenv("BUNDLE_COVERING_JOBS", "3")
    assert build_config({}).jobs == 3


@pytest.mark.parametrize("value", ["many", "2.5"])
def test_non_integer_jobs_variable(monkeypatch, value) -> None:
    monkeypatch.setenv("BUNDLE_COVERING_JOBS", value)
    with pytest.raises(ConfigError, match="BUNDLE_COVERING_JOBS"):
        build_config({})
    assert build_config({}, {"jobs": 2}).jobs == 2


def test_invalid_json(tmp_path) -> None:
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config_file(path)
