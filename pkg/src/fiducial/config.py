"""Run configuration: file loading, validation and model construction.

A configuration is a flat mapping whose keys mirror the command-line flags
(``seed``, ``workers``, ``eps``, ...) plus three tables::

    [model]
    name = "normal-ls"      # normal-ls | location | two-instrument |
                            # two-instrument-marginal | geometric | binomial
    trials = 5              # binomial only
    sigma1 = 1.0            # two-instrument only
    sigma2 = 10.0
    scale = 1.0             # location only

    [param_space]
    lo = [-4.0, 0.01]
    hi = [4.0, 4.0]

    [grid]
    counts = [400, 400]

Files may be TOML or JSON (chosen by extension).  A run manifest is also
accepted: its ``config`` entry is used.  Every validation failure raises
:class:`ConfigError` carrying the dotted field path.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import replace
from typing import Any, Optional

import numpy as np

from .errors import ConfigError
from .grid import ParameterGrid
from .model import (
    P_MARGIN,
    DataGeneratingEquation,
    make_binomial,
    make_geometric,
    make_location,
    make_normal_location_scale,
    make_two_instrument,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODEL_NAMES = ("normal-ls", "location", "two-instrument", "two-instrument-marginal", "geometric", "binomial")
MODEL_KEYS = {"name", "n", "trials", "sigma1", "sigma2", "scale"}
PARAM_SPACE_KEYS = {"lo", "hi"}
GRID_KEYS = {"counts"}
TABLES = {"model": MODEL_KEYS, "param_space": PARAM_SPACE_KEYS, "grid": GRID_KEYS}


def load_config(path: str) -> dict:
    """Read a TOML or JSON configuration file (or a run manifest)."""
    if not os.path.isfile(path):
        raise ConfigError("config", f"file not found: {path}")
    ext = os.path.splitext(path)[1].lower()
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        if ext == ".toml":
            obj = tomllib.loads(raw.decode("utf-8"))
        elif ext == ".json":
            obj = json.loads(raw.decode("utf-8"))
        else:
            raise ConfigError("config", f"unsupported extension {ext!r} (use .toml or .json)")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("config", "top level must be a table")
    if "subcommand" in obj and isinstance(obj.get("config"), dict):
        obj = obj["config"]
    return obj


def check_tables(cfg: dict, allowed_top: set[str]) -> None:
    """Reject unknown keys, naming the first one found."""
    for key, value in cfg.items():
        if key in TABLES:
            if not isinstance(value, dict):
                raise ConfigError(key, "must be a table")
            for sub in value:
                if sub not in TABLES[key]:
                    raise ConfigError(f"{key}.{sub}", "unknown key")
        elif key not in allowed_top:
            raise ConfigError(key, "unknown key")


# --------------------------------------------------------------------------
# scalar validators


def as_int(value, path: str, lo: Optional[int] = None) -> int:
    if isinstance(value, bool):
        raise ConfigError(path, "expected an integer")
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(path, f"expected an integer, got {value!r}") from None
    if isinstance(value, float):
        if not value.is_integer():
            raise ConfigError(path, f"expected an integer, got {value!r}")
        value = int(value)
    if not isinstance(value, (int, np.integer)):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be >= {lo}, got {value}")
    return int(value)


def as_float(value, path: str, positive: bool = False, unit: bool = False) -> float:
    if isinstance(value, bool):
        raise ConfigError(path, "expected a number")
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {value!r}") from None
    if not np.isfinite(v):
        raise ConfigError(path, "must be finite")
    if positive and not v > 0:
        raise ConfigError(path, f"must be positive, got {v}")
    if unit and not 0 < v < 1:
        raise ConfigError(path, f"must lie strictly between 0 and 1, got {v}")
    return v


def as_float_list(value, path: str, length: Optional[int] = None) -> list[float]:
    if isinstance(value, str):
        parts = [s for s in value.replace(",", " ").split() if s]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = [value]
    out = [as_float(v, f"{path}[{i}]") for i, v in enumerate(parts)]
    if not out:
        raise ConfigError(path, "must not be empty")
    if length is not None and len(out) != length:
        raise ConfigError(path, f"expected {length} values, got {len(out)}")
    return out


def parse_counts(value, path: str = "grid.counts") -> list[int]:
    """``"400x400"``, ``400`` or ``[400, 400]`` to a list of node counts."""
    if isinstance(value, str):
        parts = value.lower().split("x")
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = [value]
    if not parts or parts == [""]:
        raise ConfigError(path, "must not be empty")
    return [as_int(v, path, lo=2) for v in parts]


def choice(value, path: str, options) -> str:
    if value not in options:
        raise ConfigError(path, f"must be one of {', '.join(options)}; got {value!r}")
    return value


# --------------------------------------------------------------------------
# data


def read_data(value, path: str = "data") -> list[float]:
    """Numbers given inline (list or comma string) or as a path to a text/CSV file.

    Files may separate values by commas, whitespace or newlines; lines that
    do not parse as numbers (headers) are skipped.
    """
    if isinstance(value, (list, tuple, int, float)) and not isinstance(value, bool):
        return as_float_list(value, path)
    if not isinstance(value, str):
        raise ConfigError(path, "expected a list of numbers or a file path")
    if not os.path.isfile(value):
        try:
            return as_float_list(value, path)
        except ConfigError:
            raise ConfigError(path, f"not a file and not a list of numbers: {value!r}") from None
    out = []
    with open(value, encoding="utf-8") as fh:
        for line in fh:
            fields = [s for s in line.replace(",", " ").split() if s]
            try:
                values = [float(s) for s in fields]
            except ValueError:
                continue
            out.extend(values)
    if not out:
        raise ConfigError(path, f"no numbers found in {value}")
    if not all(np.isfinite(out)):
        raise ConfigError(path, "data must be finite")
    return out


# --------------------------------------------------------------------------
# models


def default_box(name: str, model_cfg: dict, data: Optional[list[float]]):
    """Data-driven parameter box used when ``param_space`` is absent."""
    if name in ("geometric", "binomial"):
        return [P_MARGIN], [1 - P_MARGIN]
    if name.startswith("two-instrument"):
        s2 = model_cfg["sigma2"]
        x = data[0] if data else 0.0
        return [x - 20 * s2], [x + 20 * s2]
    if data is None:
        raise ConfigError("param_space", "required when no data are given")
    x = np.asarray(data)
    if name == "location":
        half = 10 * model_cfg.get("scale", 1.0) / np.sqrt(len(x))
        return [float(x.mean() - half)], [float(x.mean() + half)]
    sd = float(x.std(ddof=1))
    if not sd > 0:
        raise ConfigError("data", "normal-ls needs data with positive spread")
    return [float(x.mean() - 12 * sd), sd / 50], [float(x.mean() + 12 * sd), 12 * sd]


def resolve_model(model_cfg: Any, data: Optional[list[float]] = None,
                  param_space: Any = None) -> tuple[dict, dict]:
    """Validate the ``model`` and ``param_space`` tables.

    Returns the resolved tables (with defaults filled in) so they can be
    written to a manifest.  ``data`` fixes ``n`` for models whose sample size
    follows from the data.
    """
    if not isinstance(model_cfg, dict):
        raise ConfigError("model", "must be a table")
    for key in model_cfg:
        if key not in MODEL_KEYS:
            raise ConfigError(f"model.{key}", "unknown key")
    if "name" not in model_cfg:
        raise ConfigError("model.name", "missing")
    name = choice(model_cfg["name"], "model.name", MODEL_NAMES)
    out: dict = {"name": name}

    if name in ("normal-ls", "location"):
        n = len(data) if data is not None else None
        if "n" in model_cfg:
            n_cfg = as_int(model_cfg["n"], "model.n", lo=1)
            if n is not None and n != n_cfg:
                raise ConfigError("model.n", f"is {n_cfg} but the data have {n} values")
            n = n_cfg
        if n is None:
            raise ConfigError("model.n", "missing (and no data to infer it from)")
        if name == "normal-ls" and n < 2:
            raise ConfigError("model.n", "normal-ls needs at least 2 observations")
        out["n"] = n
        if name == "location":
            out["scale"] = as_float(model_cfg.get("scale", 1.0), "model.scale", positive=True)
    elif name.startswith("two-instrument"):
        for key in ("sigma1", "sigma2"):
            if key not in model_cfg:
                raise ConfigError(f"model.{key}", "missing")
            out[key] = as_float(model_cfg[key], f"model.{key}", positive=True)
        if not out["sigma1"] < out["sigma2"]:
            raise ConfigError("model.sigma2", "must exceed model.sigma1")
        want = 2 if name == "two-instrument" else 1
        if data is not None and len(data) != want:
            raise ConfigError("data", f"{name} expects {want} value(s), got {len(data)}")
        if name == "two-instrument" and data is not None and data[1] not in (1.0, 2.0):
            raise ConfigError("data", f"instrument label must be 1 or 2, got {data[1]:g}")
    elif name == "binomial":
        if "trials" not in model_cfg:
            raise ConfigError("model.trials", "missing")
        out["trials"] = as_int(model_cfg["trials"], "model.trials", lo=1)
    if name in ("geometric", "binomial") and data is not None:
        if len(data) != 1:
            raise ConfigError("data", f"{name} expects one observation, got {len(data)}")
        v = data[0]
        top = out.get("trials", np.inf)
        low = 1 if name == "geometric" else 0
        if not (float(v).is_integer() and low <= v <= top):
            raise ConfigError("data", f"{name} observation must be an integer in [{low}, {top}], got {v:g}")

    p = 2 if name == "normal-ls" else 1
    if param_space is None:
        lo, hi = default_box(name, out, data)
    else:
        if not isinstance(param_space, dict):
            raise ConfigError("param_space", "must be a table")
        for key in param_space:
            if key not in PARAM_SPACE_KEYS:
                raise ConfigError(f"param_space.{key}", "unknown key")
        for key in ("lo", "hi"):
            if key not in param_space:
                raise ConfigError(f"param_space.{key}", "missing")
        lo = as_float_list(param_space["lo"], "param_space.lo", p)
        hi = as_float_list(param_space["hi"], "param_space.hi", p)
        for j in range(p):
            if not lo[j] < hi[j]:
                raise ConfigError(f"param_space.hi[{j}]", f"must exceed lo[{j}]")
        if name == "normal-ls" and lo[1] <= 0:
            raise ConfigError("param_space.lo[1]", "scale lower bound must be positive")
        if name in ("geometric", "binomial") and (lo[0] <= 0 or hi[0] >= 1):
            raise ConfigError("param_space", "probability bounds must lie strictly inside (0, 1)")
    return out, {"lo": [float(v) for v in lo], "hi": [float(v) for v in hi]}


def build_model(model: dict, space: dict) -> DataGeneratingEquation:
    """Instantiate a resolved model table over the resolved box."""
    name, lo, hi = model["name"], space["lo"], space["hi"]
    if name == "normal-ls":
        return make_normal_location_scale(model["n"], bounds=(tuple(lo), tuple(hi)))
    if name == "location":
        return make_location(model["n"], model["scale"], bounds=(lo[0], hi[0]))
    if name.startswith("two-instrument"):
        return make_two_instrument(model["sigma1"], model["sigma2"],
                                   machine_observed=(name == "two-instrument"), bounds=(lo[0], hi[0]))
    dge = make_geometric() if name == "geometric" else make_binomial(model["trials"])
    if (lo[0], hi[0]) != (dge.lo[0], dge.hi[0]):
        dge = replace(dge, lo=(lo[0],), hi=(hi[0],))
    return dge


def model_from_config(cfg: dict, data: Optional[list[float]] = None) -> DataGeneratingEquation:
    """Shortcut: validate ``cfg["model"]`` / ``cfg["param_space"]`` and build the model."""
    model, space = resolve_model(cfg.get("model"), data, cfg.get("param_space"))
    return build_model(model, space)


def resolve_grid(grid_cfg: Any, space: dict, default_counts) -> tuple[dict, ParameterGrid]:
    p = len(space["lo"])
    if grid_cfg is None:
        counts = list(default_counts)
    else:
        if not isinstance(grid_cfg, dict):
            raise ConfigError("grid", "must be a table")
        for key in grid_cfg:
            if key not in GRID_KEYS:
                raise ConfigError(f"grid.{key}", "unknown key")
        if "counts" not in grid_cfg:
            raise ConfigError("grid.counts", "missing")
        counts = parse_counts(grid_cfg["counts"])
    if len(counts) == 1 and p > 1:
        counts = counts * p
    if len(counts) != p:
        raise ConfigError("grid.counts", f"expected {p} counts, got {len(counts)}")
    return {"counts": counts}, ParameterGrid(tuple(space["lo"]), tuple(space["hi"]), tuple(counts))
