import json

import pytest

from fiducial.config import (
    load_config,
    model_from_config,
    parse_counts,
    read_data,
    resolve_grid,
    resolve_model,
)
from fiducial.errors import ConfigError


def test_toml_and_json_agree(tmp_path):
    (tmp_path / "a.toml").write_text('[model]\nname = "binomial"\ntrials = 5\n')
    (tmp_path / "a.json").write_text(json.dumps({"model": {"name": "binomial", "trials": 5}}))
    assert load_config(str(tmp_path / "a.toml")) == load_config(str(tmp_path / "a.json"))


def test_manifest_is_accepted_as_config(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"subcommand": "bounds", "config": {"seed": 1}}))
    assert load_config(str(path)) == {"seed": 1}


@pytest.mark.parametrize("text, field", [
    ("[model\n", "config"),
    ("x = 1", None),
])
def test_parse_errors(tmp_path, text, field):
    path = tmp_path / "bad.toml"
    path.write_text(text)
    if field is None:
        assert load_config(str(path)) == {"x": 1}
    else:
        with pytest.raises(ConfigError) as exc:
            load_config(str(path))
        assert exc.value.path == field


@pytest.mark.parametrize("model, path", [
    ({}, "model.name"),
    ({"name": "weibull"}, "model.name"),
    ({"name": "two-instrument", "sigma1": 1.0}, "model.sigma2"),
    ({"name": "two-instrument", "sigma1": "a", "sigma2": 2.0}, "model.sigma1"),
    ({"name": "two-instrument", "sigma1": 3.0, "sigma2": 2.0}, "model.sigma2"),
    ({"name": "binomial", "trials": 2.5}, "model.trials"),
    ({"name": "binomial", "trials": 5, "colour": 1}, "model.colour"),
    ({"name": "location"}, "model.n"),
])
def test_model_errors_name_the_field(model, path):
    with pytest.raises(ConfigError) as exc:
        resolve_model(model)
    assert exc.value.path == path
    assert path in str(exc.value)


def test_data_length_must_match():
    with pytest.raises(ConfigError) as exc:
        resolve_model({"name": "normal-ls", "n": 3}, [1.0, 2.0])
    assert exc.value.path == "model.n"


def test_param_space_validation():
    with pytest.raises(ConfigError) as exc:
        resolve_model({"name": "normal-ls"}, [0.0, 1.0], {"lo": [0, -1], "hi": [1, 1]})
    assert exc.value.path == "param_space.lo[1]"
    with pytest.raises(ConfigError) as exc:
        resolve_model({"name": "location"}, [0.0], {"lo": [1.0], "hi": [0.0]})
    assert exc.value.path == "param_space.hi[0]"


def test_default_box_is_data_driven():
    model, space = resolve_model({"name": "location", "scale": 2.0}, [1.0, 3.0, 2.0, 2.0])
    assert space == {"lo": [-8.0], "hi": [12.0]}
    dge = model_from_config({"model": {"name": "normal-ls"}}, [0.0, 1.0, 2.0])
    assert dge.n == 3 and dge.lo[1] == pytest.approx(1 / 50)


def test_parse_counts_and_grid():
    assert parse_counts("400x300") == [400, 300]
    assert parse_counts(7) == [7]
    with pytest.raises(ConfigError):
        parse_counts("400xabc")
    res, grid = resolve_grid({"counts": "50"}, {"lo": [0, 1], "hi": [1, 2]}, (10, 10))
    assert grid.counts == (50, 50)


def test_read_data(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x\n1.5\n2,3\n")
    assert read_data(str(path)) == [1.5, 2.0, 3.0]
    assert read_data("1, 2, 3") == [1.0, 2.0, 3.0]
    with pytest.raises(ConfigError):
        read_data("not-a-file.csv")
