"""Frequentist coverage of fiducial intervals by repeated simulation."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from ._streams import run_workers, split_count, worker_streams
from .density import tabulate_gfd
from .discrete import half_corrected_interval, model_bounds
from .errors import DimensionError, FiducialError
from .grid import ParameterGrid
from .model import DataGeneratingEquation

MAX_FAILURE_RATE = 0.5


@dataclass
class CoverageReport:
    model: str
    xi_true: list
    level: float
    reps: int
    coverage: float
    stderr: float
    mean_width: float
    failures: int
    envelope_coverage: Optional[float] = None
    envelope_mean_width: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _interval_rows(dge, x, levels, grid, coordinate):
    """``[(lo, hi, env_lo, env_hi), ...]`` per level for one data set."""
    if dge.discrete:
        bounds = model_bounds(dge, x, grid)
        out = []
        for lev in levels:
            iv = half_corrected_interval(bounds, lev)
            out.append((iv.lo, iv.hi, iv.envelope_lo, iv.envelope_hi))
        return out
    fd = tabulate_gfd(dge, x, grid(x) if callable(grid) else grid)
    if dge.p > 1:
        fd = fd.marginal(coordinate)
    out = []
    for lev in levels:
        a = (1 - lev) / 2
        lo, hi = fd.quantile([a, 1 - a])
        out.append((float(lo), float(hi), np.nan, np.nan))
    return out


def _coverage_worker(dge, xi_true, levels, grid, coordinate, reps, rng, keep_log):
    nl = len(levels)
    hits = np.zeros(nl, dtype=int)
    env_hits = np.zeros(nl, dtype=int)
    widths = np.zeros(nl)
    env_widths = np.zeros(nl)
    ok = fail = 0
    rows = []
    target = float(np.atleast_1d(xi_true)[coordinate])
    for _ in range(reps):
        u = dge.sample_noise(rng, 1)
        x = np.asarray(dge.forward(u, np.asarray(xi_true)[None, :]))[0]
        try:
            ivs = _interval_rows(dge, x, levels, grid, coordinate)
        except FiducialError:
            fail += 1
            continue
        ok += 1
        for k, (lo, hi, elo, ehi) in enumerate(ivs):
            cov = lo <= target <= hi
            hits[k] += cov
            widths[k] += hi - lo
            if np.isfinite(elo):
                env_hits[k] += elo <= target <= ehi
                env_widths[k] += ehi - elo
            if keep_log:
                rows.append((x.tolist(), levels[k], lo, hi, bool(cov)))
    return ok, fail, hits, env_hits, widths, env_widths, rows


def run_coverage_levels(dge: DataGeneratingEquation, xi_true, levels: Sequence[float], reps: int,
                        grid: Optional[ParameterGrid], seed, workers: int = 1, coordinate: int = 0,
                        keep_log: bool = False):
    """Coverage at several levels from one set of simulated data sets.

    Reusing the data across levels makes coverage nondecreasing in the
    level for a fixed seed.  ``grid`` may be a callable ``grid(x)`` that
    builds a data-dependent grid for each simulated data set.  Returns ``(reports, log_rows)`` where
    ``reports`` maps each level to a :class:`CoverageReport`.
    """
    xi_true = np.atleast_1d(np.asarray(xi_true, dtype=float))
    levels = [float(v) for v in levels]
    if xi_true.shape != (dge.p,):
        raise DimensionError(f"xi_true must have length {dge.p}")
    if not np.all((xi_true > np.array(dge.lo)) & (xi_true < np.array(dge.hi))):
        raise ValueError("xi_true must lie in the interior of the parameter box")
    if not all(0 < v < 1 for v in levels):
        raise ValueError("levels must lie in (0, 1)")
    if reps < 100:
        raise ValueError("reps must be at least 100")
    if grid is None and not dge.discrete:
        raise ValueError("continuous models need a grid")

    streams = worker_streams(seed, workers)
    parts = run_workers(_coverage_worker,
                        [(dge, xi_true, levels, grid, coordinate, r, g, keep_log)
                         for r, g in zip(split_count(reps, workers), streams)], workers)
    ok = sum(p[0] for p in parts)
    fail = sum(p[1] for p in parts)
    if fail > MAX_FAILURE_RATE * reps:
        raise FiducialError(f"interval construction failed in {fail} of {reps} replications")
    hits = sum(p[2] for p in parts)
    env_hits = sum(p[3] for p in parts)
    widths = sum(p[4] for p in parts)
    env_widths = sum(p[5] for p in parts)
    rows = [r for p in parts for r in p[6]]

    reports = {}
    for k, lev in enumerate(levels):
        cov = hits[k] / ok
        reports[lev] = CoverageReport(
            model=dge.name, xi_true=xi_true.tolist(), level=lev, reps=ok, coverage=float(cov),
            stderr=float(np.sqrt(cov * (1 - cov) / ok)), mean_width=float(widths[k] / ok), failures=fail,
            envelope_coverage=float(env_hits[k] / ok) if dge.discrete else None,
            envelope_mean_width=float(env_widths[k] / ok) if dge.discrete else None,
        )
    return reports, rows


def run_coverage(dge: DataGeneratingEquation, xi_true, level: float, reps: int,
                 grid: Optional[ParameterGrid], seed, workers: int = 1) -> CoverageReport:
    """Empirical coverage of the equal-tailed fiducial interval at one level.

    Continuous models use quantiles of the tabulated density (marginal of
    the first parameter when ``p > 1``); discrete models use the
    half-corrected interval and also report the envelope interval's
    coverage.  Replications whose interval cannot be built are counted in
    ``failures`` and excluded; more than half failing aborts the run.
    """
    reports, _ = run_coverage_levels(dge, xi_true, [level], reps, grid, seed, workers)
    return reports[float(level)]
