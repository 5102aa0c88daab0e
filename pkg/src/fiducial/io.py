"""CSV and JSON serialisation.

Everything is rendered to text first so callers can write all outputs in
one step after the computation succeeds.  Floats use ``repr`` (shortest
round-trip form) and JSON keys keep insertion order, which makes reruns
byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from typing import Iterable

import numpy as np

from .density import FiducialDensity
from .discrete import DiscreteFiducialBounds
from .sampler import SampleSet


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def csv_text(header: list[str], rows: Iterable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def json_text(obj) -> str:
    return json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n"


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# densities


def density_csv(fd: FiducialDensity, names=None) -> str:
    names = list(names or [f"xi{j}" for j in range(fd.grid.ndim)])
    nodes = fd.grid.nodes
    vals = fd.values.ravel()
    return csv_text(names + ["density"], (list(nd) + [v] for nd, v in zip(nodes, vals)))


def density_json(fd: FiducialDensity, names=None) -> str:
    return json_text({
        "parameters": list(names or [f"xi{j}" for j in range(fd.grid.ndim)]),
        "grid": fd.grid.to_dict(),
        "jacobian": fd.jacobian,
        "log_normalizer": fd.log_normalizer,
        "n_failed_nodes": fd.n_failed,
        "values": fd.values,
    })


def read_density_json(text: str) -> FiducialDensity:
    from .grid import ParameterGrid

    obj = json.loads(text)
    g = obj["grid"]
    grid = ParameterGrid(tuple(g["lo"]), tuple(g["hi"]), tuple(g["counts"]))
    return FiducialDensity(grid, np.asarray(obj["values"], dtype=float).reshape(grid.shape),
                           obj.get("log_normalizer", 0.0), obj.get("n_failed_nodes", 0), obj.get("jacobian", ""))


# --------------------------------------------------------------------------
# discrete envelopes


BOUNDS_HEADER = ["p", "H_lower", "H_half", "H_upper"]


def bounds_csv(bounds: DiscreteFiducialBounds) -> str:
    return csv_text(BOUNDS_HEADER, zip(bounds.xi, bounds.lower, bounds.half, bounds.upper))


def bounds_long_csv(named: list[tuple[str, DiscreteFiducialBounds]]) -> str:
    rows = []
    for name, b in named:
        rows.extend((name, p, lo, h, hi) for p, lo, h, hi in zip(b.xi, b.lower, b.half, b.upper))
    return csv_text(["model"] + BOUNDS_HEADER, rows)


# --------------------------------------------------------------------------
# samples


def samples_csv(ss: SampleSet, names=None, extra_cols: dict | None = None) -> str:
    if ss.set_valued:
        header = ["lo", "hi"]
    else:
        header = list(names or [f"xi{j}" for j in range(ss.draws.shape[1])])
    cols = [ss.draws[:, j] for j in range(ss.draws.shape[1])]
    if ss.weights is not None:
        header.append("weight")
        cols.append(ss.weights)
    extra_cols = extra_cols or {}
    for k, v in reversed(list(extra_cols.items())):
        header.insert(0, k)
        cols.insert(0, np.full(len(ss), v))
    return csv_text(header, zip(*cols))


def samples_meta_json(ss: SampleSet) -> str:
    return json_text(ss.meta_dict())
