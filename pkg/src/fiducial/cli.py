"""Command-line interface.

Every subcommand runs in two phases.  ``prepare`` validates the merged
configuration (file values overridden by explicit flags) and returns the
resolved configuration plus a closure; only then is the closure run, and
its outputs are written atomically together with a manifest.  A bad
configuration therefore never leaves partial files behind.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import __version__
from . import io as fio
from .config import (
    as_float,
    as_float_list,
    as_int,
    check_tables,
    choice,
    default_box,
    load_config,
    parse_counts,
    read_data,
    resolve_grid,
    resolve_model,
    build_model,
)
from .coverage import run_coverage_levels
from .density import fisher_fiducial, tabulate_gfd
from .discrete import default_p_grid, half_corrected_interval, model_bounds, slp_violation_demo
from .errors import ConfigError, FiducialError
from .grid import ParameterGrid
from .model import d_sample_mean_sd, make_location, sample_mean, sample_mean_sd
from .principles import check_slp_pair_sequential, wcp_demo
from .sampler import DEFAULT_BUDGET, sample_gfd_discrete, sample_gfd_eps

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
STOCHASTIC = {"sample", "wcp-demo", "slp-pair", "coverage"}
FISHER_CDFS = ("normal-location", "exponential-scale", "exponential-rate")
COMMON_KEYS = {"seed", "workers", "format"}


@dataclass
class Plan:
    resolved: dict
    default_format: str
    run: Callable[[str], dict]  # format -> {suffix: text}; "" is the main output


# --------------------------------------------------------------------------
# shared resolution helpers


def _common(cfg: dict, sub: str, formats=("csv", "json")) -> dict:
    out = {}
    if sub in STOCHASTIC:
        if cfg.get("seed") is None:
            raise ConfigError("seed", f"required for {sub} (seeds are never defaulted)")
        out["seed"] = as_int(cfg["seed"], "seed", lo=0)
    elif cfg.get("seed") is not None:
        out["seed"] = as_int(cfg["seed"], "seed", lo=0)
    out["workers"] = as_int(cfg.get("workers", 1), "workers", lo=1)
    if cfg.get("format") is not None:
        out["format"] = choice(cfg["format"], "format", formats)
    return out


def _model_data(cfg: dict, need_data: bool = True):
    if "model" not in cfg:
        raise ConfigError("model", "missing (give --model or a [model] table)")
    data = None
    if cfg.get("data") is not None:
        data = read_data(cfg["data"])
    elif need_data:
        raise ConfigError("data", "missing")
    model, space = resolve_model(cfg["model"], data, cfg.get("param_space"))
    return model, space, data


def _names(model: dict) -> list[str]:
    if model["name"] == "normal-ls":
        return ["mu", "sigma"]
    if model["name"] in ("geometric", "binomial"):
        return ["p"]
    return ["theta"]


# --------------------------------------------------------------------------
# subcommands


def prepare_density(cfg: dict) -> Plan:
    check_tables(cfg, COMMON_KEYS | {"data", "jacobian", "check_refinement"})
    res = _common(cfg, "density")
    model, space, data = _model_data(cfg)
    if model["name"] in ("geometric", "binomial"):
        raise ConfigError("model.name", "discrete models have envelopes, not densities; use `bounds`")
    jac = choice(cfg.get("jacobian", "full"), "jacobian", ("full", "sufficient"))
    if jac == "sufficient" and model["name"] not in ("normal-ls", "location"):
        raise ConfigError("jacobian", "the sufficient-statistic weight is available for normal-ls and location")
    refine = cfg.get("check_refinement", True)
    if not isinstance(refine, bool):
        raise ConfigError("check_refinement", "expected true or false")
    default = (400, 400) if model["name"] == "normal-ls" else (2001,)
    grid_res, grid = resolve_grid(cfg.get("grid"), space, default)
    res.update(model=model, param_space=space, grid=grid_res, data=data, jacobian=jac, check_refinement=refine)

    def run(fmt):
        dge = build_model(model, space)
        if jac == "full":
            fd = tabulate_gfd(dge, data, grid, check_refinement=refine)
        elif model["name"] == "normal-ls":
            fd = tabulate_gfd(dge, data, grid, statistic=sample_mean_sd, dS_dx=d_sample_mean_sd,
                              check_refinement=refine)
        else:
            fd = tabulate_gfd(dge, data, grid, statistic=sample_mean, check_refinement=refine)
        names = _names(model)
        return {"": fio.density_csv(fd, names) if fmt == "csv" else fio.density_json(fd, names)}

    return Plan(res, "csv", run)


def prepare_sample(cfg: dict) -> Plan:
    check_tables(cfg, COMMON_KEYS | {"data", "eps", "n_draws", "budget", "norm", "select"})
    res = _common(cfg, "sample")
    model, space, data = _model_data(cfg)
    n_draws = as_int(cfg.get("n_draws", 10_000), "n_draws", lo=1)
    budget = as_int(cfg.get("budget", DEFAULT_BUDGET), "budget", lo=1)
    res.update(model=model, param_space=space, data=data, n_draws=n_draws, budget=budget)
    seed, workers = res["seed"], res["workers"]
    names = _names(model)

    if model["name"] in ("geometric", "binomial"):
        select = choice(cfg.get("select", "interval"), "select", ("interval", "random"))
        res["select"] = select

        def run(fmt):
            ss = sample_gfd_discrete(build_model(model, space), data, n_draws, seed, select=select,
                                     budget=budget, workers=workers)
            return _sample_outputs([ss], names, fmt, ladder=False)
        return Plan(res, "csv", run)

    if cfg.get("eps") is None:
        raise ConfigError("eps", "required; give a tolerance or a comma-separated ladder")
    eps = as_float_list(cfg["eps"], "eps")
    for i, e in enumerate(eps):
        if e < 0:
            raise ConfigError(f"eps[{i}]", "must be nonnegative")
    norm = choice(cfg.get("norm", "l2"), "norm", ("l2", "linf"))
    default = (200, 200) if model["name"] == "normal-ls" else (400,)
    grid_res, grid = resolve_grid(cfg.get("grid"), space, default)
    dge = build_model(model, space)
    exact = dge.fit is not None and norm == "l2"
    if any(e == 0 for e in eps) and not exact:
        raise ConfigError("eps", "eps=0 needs the l2 norm and a model with an exact closest fit")
    res.update(eps=eps, norm=norm, grid=grid_res)

    def run(fmt):
        sets = [sample_gfd_eps(dge, data, e, n_draws, seed=[seed, k] if len(eps) > 1 else seed, grid=grid,
                               norm=norm, budget=budget, workers=workers) for k, e in enumerate(eps)]
        return _sample_outputs(sets, names, fmt, ladder=len(eps) > 1)

    return Plan(res, "csv", run)


def _sample_outputs(sets, names, fmt, ladder):
    metas = [ss.meta_dict() for ss in sets]
    if fmt == "json":
        return {"": fio.json_text([{"meta": m, "draws": ss.draws, "set_valued": ss.set_valued}
                                   for m, ss in zip(metas, sets)] if ladder else
                                  {"meta": metas[0], "draws": sets[0].draws, "set_valued": sets[0].set_valued})}
    if ladder:
        parts = [fio.samples_csv(ss, names, {"eps": ss.meta.eps}) for ss in sets]
        text = parts[0] + "".join(p.split("\n", 1)[1] for p in parts[1:])
    else:
        text = fio.samples_csv(sets[0], names)
    return {"": text, ".meta.json": fio.json_text(metas if ladder else metas[0])}


def prepare_bounds(cfg: dict) -> Plan:
    check_tables(cfg, COMMON_KEYS | {"data", "level"})
    res = _common(cfg, "bounds")
    model, space, data = _model_data(cfg)
    if model["name"] not in ("geometric", "binomial"):
        raise ConfigError("model.name", "bounds are defined for the discrete models geometric and binomial")
    level = None if cfg.get("level") is None else as_float(cfg["level"], "level", unit=True)
    grid_res, grid = resolve_grid(cfg.get("grid"), space, (10_000,))
    res.update(model=model, param_space=space, grid=grid_res, data=data, level=level)

    def run(fmt):
        b = model_bounds(build_model(model, space), data, grid)
        iv = half_corrected_interval(b, level) if level is not None else None
        if fmt == "csv":
            out = {"": fio.bounds_csv(b)}
            if iv is not None:
                out[".interval.json"] = fio.json_text(iv.__dict__)
            return out
        obj = {"direction": b.direction, "observed": b.observed, "p": b.xi, "H_lower": b.lower,
               "H_half": b.half, "H_upper": b.upper}
        if iv is not None:
            obj["interval"] = iv.__dict__
        return {"": fio.json_text(obj)}

    return Plan(res, "csv", run)


def prepare_slp_demo(cfg: dict) -> Plan:
    check_tables(cfg, COMMON_KEYS | {"n"})
    res = _common(cfg, "slp-demo")
    n = as_int(cfg.get("n", 3), "n", lo=2)
    if cfg.get("grid") is None:
        counts = [10_000]
    else:
        counts = parse_counts(cfg["grid"].get("counts") if isinstance(cfg["grid"], dict) else cfg["grid"])
        if len(counts) != 1:
            raise ConfigError("grid.counts", "slp-demo takes a single node count")
    res.update(n=n, grid={"counts": counts})

    def run(fmt):
        rep = slp_violation_demo(n, default_p_grid(counts[0]))
        named = [("geometric", rep.geometric), ("binomial", rep.binomial)]
        if fmt == "csv":
            return {"": fio.bounds_long_csv(named), ".summary.json": fio.json_text(rep.summary())}
        return {"": fio.json_text({"summary": rep.summary(), "p": rep.p,
                                   **{f"{m}_{k}": getattr(b, a) for m, b in named
                                      for k, a in (("H_lower", "lower"), ("H_half", "half"),
                                                   ("H_upper", "upper"))}})}

    return Plan(res, "csv", run)


def prepare_wcp_demo(cfg: dict) -> Plan:
    check_tables(cfg, COMMON_KEYS | {"sigma1", "sigma2", "x", "m", "n_draws"})
    res = _common(cfg, "wcp-demo")
    s1 = as_float(cfg.get("sigma1", 1.0), "sigma1", positive=True)
    s2 = as_float(cfg.get("sigma2", 10.0), "sigma2", positive=True)
    if not s1 < s2:
        raise ConfigError("sigma2", "must exceed sigma1")
    x = as_float(cfg.get("x", 0.0), "x")
    m = as_int(cfg.get("m", 1), "m")
    if m not in (1, 2):
        raise ConfigError("m", f"instrument must be 1 or 2, got {m}")
    n_draws = as_int(cfg.get("n_draws", 10_000), "n_draws", lo=1)
    res.update(sigma1=s1, sigma2=s2, x=x, m=m, n_draws=n_draws)

    def run(fmt):
        rep = wcp_demo(s1, s2, x, m, n_draws, res["seed"], res["workers"],
                       bounds=(x - 20 * s2, x + 20 * s2))
        if fmt == "csv":
            cols = list(rep.table)
            return {"": fio.csv_text(cols, zip(*(rep.table[c] for c in cols))),
                    ".summary.json": fio.json_text(rep.summary())}
        return {"": fio.json_text({"summary": rep.summary(), "table": rep.table})}

    return Plan(res, "json", run)


def prepare_slp_pair(cfg: dict) -> Plan:
    check_tables(cfg, COMMON_KEYS | {"sigma", "theta", "reps", "k_max"})
    res = _common(cfg, "slp-pair")
    sigma = as_float(cfg.get("sigma", 1.0), "sigma", positive=True)
    theta = as_float_list(cfg.get("theta", [0.0, 0.1, 0.2, 0.5, 1.0]), "theta")
    reps = as_int(cfg.get("reps", 100_000), "reps", lo=1)
    k_max = as_int(cfg.get("k_max", 169), "k_max", lo=2)
    res.update(sigma=sigma, theta=theta, reps=reps, k_max=k_max)

    def run(fmt):
        rep = check_slp_pair_sequential(sigma, k_max, theta, reps, res["seed"], res["workers"])
        d = rep.to_dict()
        if fmt == "csv":
            return {"": fio.csv_text(["theta", "c", "stderr"], zip(d["theta"], d["c"], d["stderr"])),
                    ".report.json": fio.json_text(d)}
        return {"": fio.json_text(d)}

    return Plan(res, "json", run)


def prepare_coverage(cfg: dict) -> Plan:
    check_tables(cfg, COMMON_KEYS | {"xi_true", "level", "reps", "keep_log", "box"})
    res = _common(cfg, "coverage")
    if "model" not in cfg or not isinstance(cfg["model"], dict):
        raise ConfigError("model", "missing (give --model or a [model] table)")
    name = cfg["model"].get("name")
    if isinstance(name, str) and name.startswith("two-instrument"):
        raise ConfigError("model.name", "coverage supports normal-ls, location, geometric and binomial")
    if cfg.get("xi_true") is None:
        raise ConfigError("xi_true", "missing")
    xi_true = as_float_list(cfg["xi_true"], "xi_true", 2 if name == "normal-ls" else 1)
    model_cfg = dict(cfg["model"])
    if name == "location":
        model_cfg.setdefault("n", 1)
    space_cfg = cfg.get("param_space")
    if space_cfg is None and name in ("location", "normal-ls"):
        space_cfg = _coverage_box(name, model_cfg, xi_true)
    model, space = resolve_model(model_cfg, None, space_cfg)
    p = len(space["lo"])
    for j, v in enumerate(xi_true):
        if not space["lo"][j] < v < space["hi"][j]:
            raise ConfigError(f"xi_true[{j}]", "must lie inside param_space")
    levels = as_float_list(cfg.get("level", 0.95), "level")
    for i, v in enumerate(levels):
        as_float(v, f"level[{i}]", unit=True)
    reps = as_int(cfg.get("reps", 2000), "reps", lo=100)
    keep_log = cfg.get("keep_log", False)
    if not isinstance(keep_log, bool):
        raise ConfigError("keep_log", "expected true or false")
    discrete = model["name"] in ("geometric", "binomial")
    default = (10_000,) if discrete else ((200, 200) if p == 2 else (2001,))
    grid_res, grid = resolve_grid(cfg.get("grid"), space, default)
    box = choice(cfg.get("box", "fixed" if discrete or cfg.get("param_space") is not None else "data"),
                 "box", ("data", "fixed"))
    if box == "data" and not discrete:
        counts = grid_res["counts"]

        def grid(x):
            lo, hi = default_box(model["name"], model, list(x))
            return ParameterGrid(tuple(lo), tuple(hi), tuple(counts))
    res.update(model=model, param_space=space, grid=grid_res, box=box, xi_true=xi_true, level=levels,
               reps=reps, keep_log=keep_log)

    def run(fmt):
        dge = build_model(model, space)
        reports, rows = run_coverage_levels(dge, xi_true, levels, reps, grid, res["seed"], res["workers"],
                                            keep_log=keep_log)
        dicts = [reports[v].to_dict() for v in levels]
        if fmt == "csv":
            cols = list(dicts[0])
            out = {"": fio.csv_text(cols, ([d[c] if not isinstance(d[c], list) else
                                            " ".join(repr(v) for v in d[c]) for c in cols] for d in dicts))}
        else:
            out = {"": fio.json_text(dicts)}
        if keep_log:
            out[".log.csv"] = fio.csv_text(["data", "level", "lo", "hi", "covered"],
                                           ((" ".join(repr(v) for v in r[0]),) + tuple(r[1:]) for r in rows))
        return out

    return Plan(res, "json", run)


def _coverage_box(name, model_cfg, xi_true):
    """Box around the true parameter wide enough for almost every simulated data set."""
    if xi_true[-1] <= 0 and name == "normal-ls":
        raise ConfigError("xi_true[1]", "scale must be positive")
    if name == "location":
        half = 15 * as_float(model_cfg.get("scale", 1.0), "model.scale", positive=True) / np.sqrt(
            as_int(model_cfg["n"], "model.n", lo=1))
        return {"lo": [xi_true[0] - half], "hi": [xi_true[0] + half]}
    mu, sigma = xi_true
    return {"lo": [mu - 20 * sigma, sigma / 100], "hi": [mu + 20 * sigma, 20 * sigma]}


def _fisher_cdf(name):
    if name == "normal-location":
        return lambda x, t: stats.norm.cdf(x - t)
    if name == "exponential-scale":
        return lambda x, t: -np.expm1(-x / t)
    return lambda x, t: -np.expm1(-t * x)


def prepare_fisher(cfg: dict) -> Plan:
    check_tables(cfg, COMMON_KEYS | {"cdf", "x"})
    res = _common(cfg, "fisher")
    cdf = choice(cfg.get("cdf", "normal-location"), "cdf", FISHER_CDFS)
    x = as_float(cfg.get("x", 0.0), "x", positive=cdf != "normal-location")
    ps = cfg.get("param_space")
    if ps is None:
        lo, hi = ([x - 10.0], [x + 10.0]) if cdf == "normal-location" else ([x / 100], [100 * x])
        if cdf == "exponential-rate":
            lo, hi = [1 / (100 * x)], [100 / x]
        space = {"lo": lo, "hi": hi}
    else:
        if not isinstance(ps, dict) or "lo" not in ps or "hi" not in ps:
            raise ConfigError("param_space", "needs lo and hi")
        space = {"lo": as_float_list(ps["lo"], "param_space.lo", 1), "hi": as_float_list(ps["hi"], "param_space.hi", 1)}
        if not space["lo"][0] < space["hi"][0]:
            raise ConfigError("param_space.hi[0]", "must exceed lo[0]")
        if cdf != "normal-location" and space["lo"][0] <= 0:
            raise ConfigError("param_space.lo[0]", "must be positive for exponential models")
    grid_res, grid = resolve_grid(cfg.get("grid"), space, (2001,))
    res.update(cdf=cdf, x=x, param_space=space, grid=grid_res)

    def run(fmt):
        fd = fisher_fiducial(_fisher_cdf(cdf), x, grid)
        theta = grid.axis_nodes(0)
        cols = {"theta": theta, "fisher": fd.values}
        summary: dict = {"cdf": cdf, "x": x}
        if cdf == "normal-location":
            dge = make_location(1, 1.0, bounds=(space["lo"][0], space["hi"][0]))
            gfd = tabulate_gfd(dge, [x], grid, check_refinement=False)
            cols["gfd"] = gfd.values
            summary["sup_norm"] = float(np.max(np.abs(fd.values - gfd.values)))
        if fmt == "csv":
            names = list(cols)
            return {"": fio.csv_text(names, zip(*(cols[c] for c in names))),
                    ".summary.json": fio.json_text(summary)}
        return {"": fio.json_text({"summary": summary, **cols})}

    return Plan(res, "csv", run)


PREPARE = {
    "density": prepare_density,
    "sample": prepare_sample,
    "bounds": prepare_bounds,
    "slp-demo": prepare_slp_demo,
    "wcp-demo": prepare_wcp_demo,
    "slp-pair": prepare_slp_pair,
    "coverage": prepare_coverage,
    "fisher": prepare_fisher,
}


# --------------------------------------------------------------------------
# argument parsing


def _model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", dest="model.name", metavar="NAME", help="model name (see docs/config.md)")
    g.add_argument("--n", dest="model.n", metavar="N", type=int, help="sample size (inferred from --data if omitted)")
    g.add_argument("--trials", dest="model.trials", metavar="K", type=int, help="binomial number of trials")
    g.add_argument("--sigma1", dest="model.sigma1", metavar="S", type=float, help="two-instrument: precise scale")
    g.add_argument("--sigma2", dest="model.sigma2", metavar="S", type=float, help="two-instrument: imprecise scale")
    g.add_argument("--scale", dest="model.scale", metavar="S", type=float, help="location: known scale")
    g.add_argument("--lo", dest="param_space.lo", metavar="V[,V]", help="lower corner of the parameter box")
    g.add_argument("--hi", dest="param_space.hi", metavar="V[,V]", help="upper corner of the parameter box")


def _grid_flag(p, help_text="node counts, e.g. 400x400"):
    p.add_argument("--grid", dest="grid.counts", metavar="COUNTS", help=help_text)


def _data_flag(p):
    p.add_argument("--data", metavar="PATH|V,V,...", help="data file (CSV or whitespace) or inline values")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--config", metavar="PATH", help="TOML or JSON config (or a run manifest); flags override it")
    g.add_argument("--seed", type=int, help="RNG seed (required for stochastic subcommands)")
    g.add_argument("--workers", type=int, help="number of worker streams (default 1); part of the seed contract")
    g.add_argument("--format", choices=("csv", "json"), help="output format")
    g.add_argument("--out", metavar="PATH", help="output file; also writes PATH.manifest.json (default: stdout)")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="fiducial", description="Generalized fiducial distributions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", required=True)

    p = subs.add_parser("density", parents=[common], help="tabulate the Jacobian-weighted fiducial density")
    _model_flags(p), _data_flag(p), _grid_flag(p)
    p.add_argument("--jacobian", choices=("full", "sufficient"), help="weight: full subdeterminant sum "
                   "or the sufficient-statistic determinant")
    p.add_argument("--no-check-refinement", dest="check_refinement", action="store_const", const=False,
                   help="skip the grid-doubling integrability check")

    p = subs.add_parser("sample", parents=[common], help="epsilon-limit (or exact discrete) fiducial draws")
    _model_flags(p), _data_flag(p), _grid_flag(p, "argmin search grid, e.g. 200x200")
    p.add_argument("--eps", metavar="E[,E...]", help="tolerance or comma-separated ladder")
    p.add_argument("--n-draws", dest="n_draws", type=int, help="accepted draws per tolerance (default 10000)")
    p.add_argument("--budget", type=int, help="maximum proposals per tolerance (default 1e7)")
    p.add_argument("--norm", choices=("l2", "linf"), help="distance between x and G(U*, xi)")
    p.add_argument("--select", choices=("interval", "random"), help="discrete models: keep intervals or a point")

    p = subs.add_parser("bounds", parents=[common], help="discrete fiducial CDF envelopes")
    _model_flags(p), _data_flag(p), _grid_flag(p, "number of p nodes (default 10000)")
    p.add_argument("--level", type=float, help="also report the half-corrected interval at this level")

    p = subs.add_parser("slp-demo", parents=[common], help="geometric versus binomial envelopes")
    p.add_argument("--n", type=int, help="observed geometric count / binomial trials (default 3)")
    _grid_flag(p, "number of p nodes (default 10000)")

    p = subs.add_parser("wcp-demo", parents=[common], help="conditional versus marginal two-instrument draws")
    p.add_argument("--sigma1", type=float, help="precise instrument scale (default 1)")
    p.add_argument("--sigma2", type=float, help="imprecise instrument scale (default 10)")
    p.add_argument("--x", type=float, help="observed value (default 0)")
    p.add_argument("--m", type=int, help="observed instrument, 1 or 2 (default 1)")
    p.add_argument("--n-draws", dest="n_draws", type=int, help="draws per distribution (default 10000)")

    p = subs.add_parser("slp-pair", parents=[common], help="estimate P(O2 | O1) across theta")
    p.add_argument("--sigma", type=float, help="observation scale (default 1)")
    p.add_argument("--theta", metavar="T[,T...]", help="theta grid (default 0,0.1,0.2,0.5,1.0)")
    p.add_argument("--reps", type=int, help="replications per theta (default 100000)")
    p.add_argument("--k-max", dest="k_max", type=int, help="maximum sample size (default 169)")

    p = subs.add_parser("coverage", parents=[common], help="empirical coverage of fiducial intervals")
    _model_flags(p), _grid_flag(p)
    p.add_argument("--xi-true", dest="xi_true", metavar="V[,V]", help="true parameter")
    p.add_argument("--level", metavar="L[,L...]", help="interval level(s) (default 0.95)")
    p.add_argument("--reps", type=int, help="replications (default 2000, minimum 100)")
    p.add_argument("--keep-log", dest="keep_log", action="store_const", const=True,
                   help="write a per-replication CSV log next to --out")

    p = subs.add_parser("fisher", parents=[common], help="single-observation fiducial density -dF/dtheta")
    p.add_argument("--cdf", choices=FISHER_CDFS, help="family F(x, theta) (default normal-location)")
    p.add_argument("--x", type=float, help="observation (default 0)")
    p.add_argument("--lo", dest="param_space.lo", help="lower parameter bound")
    p.add_argument("--hi", dest="param_space.hi", help="upper parameter bound")
    _grid_flag(p, "number of nodes (default 2001)")
    return parser


def merge_config(file_cfg: dict, args: argparse.Namespace) -> dict:
    """Overlay explicitly given flags on the file configuration."""
    cfg = {k: (dict(v) if isinstance(v, dict) else v) for k, v in file_cfg.items()}
    skip = {"subcommand", "config", "out", "verbose"}
    for key, value in vars(args).items():
        if key in skip or value is None:
            continue
        if "." in key:
            table, sub = key.split(".", 1)
            tab = cfg.setdefault(table, {})
            if not isinstance(tab, dict):
                raise ConfigError(table, "must be a table")
            tab[sub] = value
        else:
            cfg[key] = value
    return cfg


def write_outputs(outputs: dict, out: Optional[str], manifest: dict) -> None:
    if out is None:
        sys.stdout.write(outputs[""])
        return
    paths = {out + suffix: text for suffix, text in outputs.items()}
    manifest["outputs"] = {os.path.basename(path): fio.sha256(text) for path, text in paths.items()}
    for path, text in paths.items():
        fio.write_atomic(path, text)
    fio.write_atomic(out + ".manifest.json", fio.json_text(manifest))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    sub = args.subcommand
    try:
        file_cfg = load_config(args.config) if args.config else {}
        cfg = merge_config(file_cfg, args)
        plan = PREPARE[sub](cfg)
    except ConfigError as exc:
        print(f"fiducial {sub}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fmt = plan.resolved.get("format", plan.default_format)
    try:
        outputs = plan.run(fmt)
    except FiducialError as exc:
        print(f"fiducial {sub}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"fiducial {sub}: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    resolved = dict(plan.resolved)
    resolved["format"] = fmt
    manifest = {"subcommand": sub, "config": resolved, "seed": resolved.get("seed"),
                "workers": resolved["workers"], "version": __version__}
    try:
        write_outputs(outputs, args.out, manifest)
    except OSError as exc:
        print(f"fiducial {sub}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
