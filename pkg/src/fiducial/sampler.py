"""Monte Carlo draws from generalized fiducial distributions.

:func:`sample_gfd_eps` is plain rejection: draw fresh noise ``U*``, find the
parameter that brings ``G(U*, xi)`` closest to the observed data, and keep
that parameter when the remaining distance is at most ``eps``.  For
discrete inverse-CDF models the exact-fit event has positive probability
and :func:`sample_gfd_discrete` conditions on it directly.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ._streams import run_workers, split_count, worker_streams
from .density import FiducialDensity
from .discrete import _direction
from .errors import BudgetExhausted, DimensionError, GridTooCoarse, ZeroMassEvent
from .grid import ParameterGrid
from .model import DataGeneratingEquation

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10**7
TIE_TOL = 1e-12
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
RECENTRE_ROUNDS = 5
_MAX_CHUNK = 1_000_000
_GRID_CHUNK_ELEMENTS = 2_000_000


@dataclass
class SampleMeta:
    model: str
    data: list
    eps: Optional[float]
    proposals_used: int
    n_accepted: int
    acceptance_rate: float
    seed: Optional[int]
    norm: str = "l2"
    workers: int = 1
    method: str = ""
    extra: dict = field(default_factory=dict)


@dataclass
class SampleSet:
    """Draws from a fiducial distribution.

    ``draws`` has shape ``(N, p)``, or ``(N, 2)`` holding ``[lo, hi]``
    parameter intervals when ``set_valued`` is true (discrete models).
    """

    draws: np.ndarray
    meta: SampleMeta
    weights: Optional[np.ndarray] = None
    set_valued: bool = False

    def __len__(self):
        return len(self.draws)

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Point draws and weights; interval draws use the half correction.

        Each interval contributes both endpoints with weight ``1 / (2N)``,
        whose mixture CDF is the average of the two envelope bounds.
        """
        if self.set_valued:
            n = len(self.draws)
            pts = np.concatenate([self.draws[:, 0], self.draws[:, 1]])[:, None]
            return pts, np.full(2 * n, 1.0 / (2 * n))
        if self.weights is None:
            return self.draws, np.full(len(self.draws), 1.0 / max(len(self.draws), 1))
        return self.draws, self.weights

    def meta_dict(self) -> dict:
        return asdict(self.meta)


# --------------------------------------------------------------------------
# closest-fit search


def _distance(resid: np.ndarray, norm: str) -> np.ndarray:
    if norm == "l2":
        return np.sqrt(np.einsum("...i,...i->...", resid, resid))
    return np.max(np.abs(resid), axis=-1)


def grid_argmin(dge: DataGeneratingEquation, x, u, grid: ParameterGrid, rng: np.random.Generator,
                norm: str = "l2", refine_iters: int = 20, sweeps: Optional[int] = None):
    """Two-stage minimisation of ``||x - G(u, xi)||`` over ``xi`` for each noise row.

    A pass over every grid node picks the best node (ties within 1e-12 are
    broken uniformly at random), then cyclic golden-section searches, one
    coordinate at a time, refine inside the node's neighbouring cells.
    Returns ``(xi, distance, at_edge)``; ``at_edge`` marks rows whose refined
    optimum still sits on the search bracket away from the box boundary after
    the bracket has been re-centred on it a few times, meaning the grid was
    too coarse to bracket the minimum.
    """
    u = np.atleast_2d(u)
    x = np.asarray(x, dtype=float)
    nodes = grid.nodes
    K = len(nodes)
    B = len(u)
    start = np.empty((B, dge.p))
    chunk = max(1, _GRID_CHUNK_ELEMENTS // (K * max(dge.n, 1)))
    for s in range(0, B, chunk):
        uu = u[s:s + chunk]
        d = _distance(x - dge.forward(uu[:, None, :], nodes[None, :, :]), norm)
        mn = d.min(axis=1, keepdims=True)
        keys = np.where(d <= mn + TIE_TOL, rng.random(d.shape), -1.0)
        start[s:s + chunk] = nodes[np.argmax(keys, axis=1)]

    h = grid.widths
    box_lo, box_hi = np.array(grid.lo), np.array(grid.hi)
    if sweeps is None:
        sweeps = 1 if dge.p == 1 else 10
    tol = 2.0 * h * _GOLDEN**refine_iters + 1e-12
    xi = np.empty_like(start)
    dist = np.empty(B)
    edge = np.ones(B, dtype=bool)
    centre = start
    # a flagged optimum gets its bracket re-centred a few times before it is reported
    for _ in range(1 + RECENTRE_ROUNDS):
        rows = np.flatnonzero(edge)
        if len(rows) == 0:
            break
        br_lo = np.maximum(centre[rows] - h, box_lo)
        br_hi = np.minimum(centre[rows] + h, box_hi)
        xr, dr = _refine(dge, x, u[rows], centre[rows], br_lo, br_hi, norm, sweeps, refine_iters)
        xi[rows], dist[rows] = xr, dr
        at_lo = (xr - br_lo <= tol) & (br_lo > box_lo)
        at_hi = (br_hi - xr <= tol) & (br_hi < box_hi)
        edge[rows] = np.any(at_lo | at_hi, axis=1)
        centre = xi
    return xi, dist, edge


def _refine(dge, x, u, start, br_lo, br_hi, norm, sweeps, refine_iters):
    def objective(xi):
        return _distance(x - dge.forward(u, xi), norm)

    xi = start.copy()
    for _ in range(sweeps):
        for j in range(dge.p):
            xi = _golden_coordinate(objective, xi, j, br_lo[:, j], br_hi[:, j], refine_iters)
    if norm == "l2":
        xi = _gauss_newton_polish(dge, x, u, xi, objective, br_lo, br_hi)
    d_ref = objective(xi)
    d_start = objective(start)
    worse = ~(d_ref <= d_start)
    return np.where(worse[:, None], start, xi), np.where(worse, d_start, d_ref)


def _pinned_step(dge, x, u, xi, D, pin, lo, hi):
    # least-squares step over the free coordinates with ``pin`` held at the bound
    base = xi
    free = (~pin).astype(float)
    r = x - dge.forward(u, base)
    step = np.einsum("bpn,bn->bp", np.linalg.pinv(D * free[:, None, :]), r)
    return np.clip(base + step * free, lo, hi)


def _gauss_newton_polish(dge, x, u, xi, objective, lo, hi, steps=5):
    # coordinate search crawls along correlated valleys; least-squares steps finish the job.
    # A clipped step is retried with each clipped coordinate pinned to its bound in turn.
    f = objective(xi)
    for _ in range(steps):
        D, _ = dge.derivative(u, xi)
        r = x - dge.forward(u, xi)
        full = xi + np.einsum("bpn,bn->bp", np.linalg.pinv(D), r)
        trial = np.clip(full, lo, hi)
        clipped = trial != full
        cands = [trial]
        if clipped.any():
            for j in range(dge.p):
                pin = np.zeros_like(clipped)
                pin[:, j] = clipped[:, j]
                cands.append(_pinned_step(dge, x, u, np.where(pin, trial, xi), D, pin, lo, hi))
            cands.append(_pinned_step(dge, x, u, trial, D, clipped, lo, hi))
        for cand in cands:
            fc = objective(cand)
            better = fc < f
            xi = np.where(better[:, None], cand, xi)
            f = np.where(better, fc, f)
    return xi


def _golden_coordinate(objective, xi, j, a, b, iters):
    a = a.copy()
    b = b.copy()

    def at(v):
        trial = xi.copy()
        trial[:, j] = v
        return objective(trial)

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = at(c), at(d)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        keep_c = np.where(left, c, d)        # surviving interior point
        keep_f = np.where(left, fc, fd)
        new = np.where(left, b - _GOLDEN * (b - a), a + _GOLDEN * (b - a))
        f_new = at(new)
        c = np.where(left, new, keep_c)
        fc = np.where(left, f_new, keep_f)
        d = np.where(left, keep_c, new)
        fd = np.where(left, keep_f, f_new)
    out = xi.copy()
    out[:, j] = 0.5 * (a + b)
    return out


# --------------------------------------------------------------------------
# epsilon sampler


def _eps_worker(dge, x, eps, quota, budget, rng, solve):
    parts = []
    used = got = 0
    while got < quota and used < budget:
        need = quota - got
        rate = (got + 1) / used if used else None
        size = 10_000 if rate is None else int(min(max(1.5 * need / rate, 1_000), _MAX_CHUNK))
        size = min(size, budget - used)
        u = dge.sample_noise(rng, size)
        xi, dist = solve(u, rng, eps)
        acc = np.flatnonzero(dist <= eps)
        if len(acc) >= need:
            acc = acc[:need]
            used += int(acc[-1]) + 1
        else:
            used += size
        parts.append(xi[acc])
        got += len(acc)
    draws = np.concatenate(parts) if parts else np.empty((0, dge.p))
    return draws, used


def sample_gfd_eps(dge: DataGeneratingEquation, x, eps: float, n_target: int, seed: int,
                   grid: Optional[ParameterGrid] = None, norm: str = "l2", budget: int = DEFAULT_BUDGET,
                   workers: int = 1, argmin: str = "auto", refine_iters: int = 20) -> SampleSet:
    """Draw from the conditional law of the best-fitting parameter given a fit within ``eps``.

    Parameters
    ----------
    eps : float
        Acceptance tolerance on ``||x - G(U*, xi_hat)||``.  Must be
        positive, except that ``eps=0`` is allowed when the model has an
        exact closest-fit solver (events of positive probability, such as
        matching the observed instrument).
    grid : ParameterGrid, optional
        Search grid for the two-stage argmin; defaults to 200 nodes per axis
        over the model's box.
    norm : {"l2", "linf"}
    argmin : {"auto", "grid", "exact"}
        ``"auto"`` uses the model's exact solver when it exists and the norm
        is ``"l2"``, the grid search otherwise.
    workers : int
        Number of independent seeded streams; results are merged in worker
        order, so output depends on ``(seed, workers)`` only.
    """
    x = dge.check_data(x)
    if norm not in ("l2", "linf"):
        raise ValueError(f"norm must be 'l2' or 'linf', got {norm!r}")
    if n_target < 1:
        raise ValueError("n_target must be positive")
    if argmin == "auto":
        argmin = "exact" if (dge.fit is not None and norm == "l2") else "grid"
    if argmin == "exact" and (dge.fit is None or norm != "l2"):
        raise ValueError("the exact closest-fit solver needs model support and the l2 norm")
    if eps < 0 or (eps == 0 and argmin != "exact"):
        raise ValueError("eps must be positive (eps=0 only with an exact closest-fit solver)")
    if grid is None:
        grid = dge.grid(200 if dge.p == 1 else 60)

    if argmin == "exact":
        def solve(u, rng, eps_):
            return dge.fit(u, x)
    else:
        def solve(u, rng, eps_):
            xi, dist, edge = grid_argmin(dge, x, u, grid, rng, norm, refine_iters)
            bad = edge & (dist <= eps_)
            if bad.any():
                raise GridTooCoarse(f"{int(bad.sum())} accepted argmins hit the refinement bracket; "
                                    "use a finer grid")
            return xi, dist

    streams = worker_streams(seed, workers)
    quotas = split_count(n_target, workers)
    budgets = split_count(budget, workers)
    results = run_workers(_eps_worker, [(dge, x, eps, q, b, r, solve)
                                        for q, b, r in zip(quotas, budgets, streams)], workers)
    draws = np.concatenate([r[0] for r in results])
    used = sum(r[1] for r in results)
    meta = SampleMeta(model=dge.name, data=x.tolist(), eps=float(eps), proposals_used=int(used),
                      n_accepted=len(draws), acceptance_rate=len(draws) / used if used else 0.0,
                      seed=seed, norm=norm, workers=workers, method=argmin)
    out = SampleSet(draws, meta)
    log.debug("eps=%g accepted %d of %d proposals", eps, len(draws), used)
    if len(draws) < n_target:
        raise BudgetExhausted(f"accepted {len(draws)} of {n_target} draws in {used} proposals "
                              f"(eps={eps:g} too small for the budget)", partial=out)
    return out


def sample_gfd_ladder(dge, x, eps_ladder, n_target, seed, **kw) -> list[SampleSet]:
    """:func:`sample_gfd_eps` at each tolerance, rung ``k`` seeded with ``(seed, k)``."""
    return [sample_gfd_eps(dge, x, eps, n_target, seed=[seed, k], **kw)
            for k, eps in enumerate(eps_ladder)]


# --------------------------------------------------------------------------
# exact conditioning for discrete inverse-CDF models


def _threshold(fn, x, u, lo, hi, increasing, iters=60):
    # smallest xi with fn(x, xi) >= u (increasing) or largest (decreasing)
    a = np.full_like(u, lo)
    b = np.full_like(u, hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        ok = np.asarray(fn(x, mid)) >= u
        if increasing:
            b = np.where(ok, mid, b)
            a = np.where(ok, a, mid)
        else:
            a = np.where(ok, mid, a)
            b = np.where(ok, b, mid)
    return b if increasing else a


def solve_interval(F, x, u, lo, hi, direction):
    """The set ``{xi : F(x-1, xi) < u <= F(x, xi)}`` inside ``[lo, hi]``.

    Returns ``(a, b, nonempty)``; the set is the interval between ``a`` and
    ``b``.
    """
    u = np.asarray(u, dtype=float)
    if direction == "increasing":
        a = _threshold(F, x, u, lo, hi, True)
        a = np.where(np.asarray(F(x, np.full_like(u, lo))) >= u, lo, a)
        reach = np.asarray(F(x, np.full_like(u, hi))) >= u
        b = _threshold(F, x - 1, u, lo, hi, True)
        b = np.where(np.asarray(F(x - 1, np.full_like(u, hi))) < u, hi, b)
        return a, b, reach & (a < b)
    b = _threshold(F, x, u, lo, hi, False)
    b = np.where(np.asarray(F(x, np.full_like(u, hi))) >= u, hi, b)
    reach = np.asarray(F(x, np.full_like(u, lo))) >= u
    a = _threshold(F, x - 1, u, lo, hi, False)
    a = np.where(np.asarray(F(x - 1, np.full_like(u, lo))) < u, lo, a)
    return a, b, reach & (a < b)


def _discrete_worker(dge, x, direction, quota, budget, rng, select):
    lo, hi = dge.lo[0], dge.hi[0]
    parts = []
    used = got = 0
    while got < quota and used < budget:
        need = quota - got
        size = min(max(need * 2, 1_000), _MAX_CHUNK, budget - used)
        u = dge.sample_noise(rng, size)[:, 0]
        a, b, ok = solve_interval(dge.cdf, x, u, lo, hi, direction)
        acc = np.flatnonzero(ok)
        if len(acc) >= need:
            acc = acc[:need]
            used += int(acc[-1]) + 1
        else:
            used += size
        iv = np.column_stack([a[acc], b[acc]])
        if select == "random":
            iv = (iv[:, 0] + rng.random(len(iv)) * (iv[:, 1] - iv[:, 0]))[:, None]
        parts.append(iv)
        got += len(acc)
    width = 1 if select == "random" else 2
    return (np.concatenate(parts) if parts else np.empty((0, width))), used


def sample_gfd_discrete(dge: DataGeneratingEquation, x, n_target: int, seed: int, select: str = "interval",
                        budget: int = DEFAULT_BUDGET, workers: int = 1) -> SampleSet:
    """Condition on an exact fit for a discrete inverse-CDF model.

    Each accepted ``U*`` yields the whole interval of parameters reproducing
    ``x``.  With ``select="interval"`` the intervals are returned
    (``SampleSet.points`` applies the half correction); ``select="random"``
    instead picks a uniform point inside each interval.
    """
    if dge.cdf is None or dge.p != 1:
        raise ValueError("exact conditioning needs a one-parameter model with a CDF")
    if select not in ("interval", "random"):
        raise ValueError("select must be 'interval' or 'random'")
    xv = float(dge.check_data(x)[0])
    probe = np.linspace(dge.lo[0], dge.hi[0], 257)
    direction = _direction(np.asarray(dge.cdf(xv, probe)))
    if direction == "flat":
        direction = _direction(np.asarray(dge.cdf(xv - 1, probe)))
    if direction not in ("increasing", "decreasing"):
        raise ZeroMassEvent(f"cannot orient F({xv:g}, .) on the parameter range")
    streams = worker_streams(seed, workers)
    results = run_workers(_discrete_worker,
                          [(dge, xv, direction, q, b, r, select) for q, b, r in
                           zip(split_count(n_target, workers), split_count(budget, workers), streams)],
                          workers)
    draws = np.concatenate([r[0] for r in results])
    used = sum(r[1] for r in results)
    meta = SampleMeta(model=dge.name, data=[xv], eps=0.0, proposals_used=int(used), n_accepted=len(draws),
                      acceptance_rate=len(draws) / used if used else 0.0, seed=seed, workers=workers,
                      method=f"exact-{select}", extra={"direction": direction})
    out = SampleSet(draws, meta, set_valued=(select == "interval"))
    if len(draws) == 0:
        raise ZeroMassEvent(f"no noise draw reproduces x={xv:g} within {used} proposals")
    if len(draws) < n_target:
        raise BudgetExhausted(f"accepted {len(draws)} of {n_target} draws in {used} proposals", partial=out)
    return out


# --------------------------------------------------------------------------


def sample_from_density(fd: FiducialDensity, n_target: int, seed) -> SampleSet:
    """Inverse-CDF draws from a one-parameter tabulated density."""
    if fd.grid.ndim != 1:
        raise DimensionError("sampling by inverse CDF needs a one-parameter density")
    rng = np.random.default_rng(seed)
    draws = fd.quantile(rng.random(n_target))[:, None]
    meta = SampleMeta(model=f"tabulated-{fd.jacobian}", data=[], eps=None, proposals_used=n_target,
                      n_accepted=n_target, acceptance_rate=1.0, seed=seed, method="inverse-cdf")
    return SampleSet(draws, meta)
