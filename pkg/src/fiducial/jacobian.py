"""Jacobian weights of the continuous fiducial density.

The full weight sums absolute ``p x p`` subdeterminants of the ``n x p``
derivative matrix ``dG/dxi`` evaluated at ``u = G^{-1}(x, xi)`` over every
choice of ``p`` rows.  The sufficient-statistic weight replaces the sum by
the single determinant of ``d S(G(u, xi)) / dxi``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from .errors import (DimensionError, InverseUnavailable, NonAncillary, SingularStatistic, SolverFailure,
                     TooManySubsets)
from .model import DataGeneratingEquation, finite_difference_jacobian

MAX_SUBSETS = 10**6
DEGENERATE_RTOL = 1e-14
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class JacobianResult:
    value: float
    n_subsets: int
    method: str
    condition_flag: bool


def row_subsets(n: int, p: int) -> np.ndarray:
    """All increasing ``p``-tuples of row indices, lexicographic order."""
    return np.array(list(combinations(range(n), p)), dtype=np.intp).reshape(-1, p)


def _abs_subdeterminants(D: np.ndarray, subsets: np.ndarray):
    # D: (N, n, p); returns |det| and degeneracy flags, each (N, C)
    sub = D[:, subsets, :]                       # (N, C, p, p)
    dets = np.abs(np.linalg.det(sub))            # LAPACK getrf: LU with partial pivoting
    scale = np.prod(np.linalg.norm(sub, axis=-1), axis=-1)
    return dets, dets < DEGENERATE_RTOL * scale


def _check_dims(dge: DataGeneratingEquation, max_subsets: int) -> int:
    if dge.inverse is None:
        raise InverseUnavailable(f"{dge.name}: no inverse map, the Jacobian weight is undefined")
    if dge.p > dge.n:
        raise DimensionError(f"p={dge.p} exceeds n={dge.n}")
    c = math.comb(dge.n, dge.p)
    if c > max_subsets:
        raise TooManySubsets(f"C({dge.n}, {dge.p}) = {c} row subsets exceeds the limit {max_subsets}")
    return c


def jacobian_values(dge: DataGeneratingEquation, x, xis, max_subsets: int = MAX_SUBSETS):
    """Full Jacobian weight at many parameter values.

    Returns ``(values, flags, method)`` with ``values`` and ``flags`` of
    shape ``(N,)``.  Entries where the inverse produced non-finite noise are
    NaN.
    """
    c = _check_dims(dge, max_subsets)
    x = dge.check_data(x)
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    subsets = row_subsets(dge.n, dge.p)
    values = np.empty(len(xis))
    flags = np.zeros(len(xis), dtype=bool)
    chunk = max(1, _CHUNK_ELEMENTS // (c * dge.p * dge.p))
    method = "analytic"
    for start in range(0, len(xis), chunk):
        xi = xis[start:start + chunk]
        with np.errstate(all="ignore"):
            u = np.asarray(dge.inverse(x, xi), dtype=float)
        bad = ~np.all(np.isfinite(u), axis=-1)
        u = np.where(bad[:, None], 0.0, u)
        D, method = dge.derivative(u, xi)
        D = np.broadcast_to(D, (len(xi), dge.n, dge.p))
        dets, degenerate = _abs_subdeterminants(D, subsets)
        # fixed-order reduction keeps results independent of chunking
        values[start:start + chunk] = np.where(bad, np.nan, dets.sum(axis=-1))
        flags[start:start + chunk] = degenerate.any(axis=-1) & ~bad
    return values, flags, method


def jacobian_full(dge: DataGeneratingEquation, x, xi, max_subsets: int = MAX_SUBSETS) -> JacobianResult:
    """Sum of absolute subdeterminants over all ``C(n, p)`` row choices."""
    c = _check_dims(dge, max_subsets)
    x = dge.check_data(x)
    xi = np.asarray(xi, dtype=float).reshape(1, dge.p)
    u = np.asarray(dge.inverse(x, xi), dtype=float)
    D, method = dge.derivative(u, xi)
    D = np.broadcast_to(D, (1, dge.n, dge.p))
    dets, degenerate = _abs_subdeterminants(D, row_subsets(dge.n, dge.p))
    return JacobianResult(value=math.fsum(dets[0]), n_subsets=c, method=method,
                          condition_flag=bool(degenerate.any()))


def _statistic_derivative(dge, S, x, xis, dS_dx=None):
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    u = np.asarray(dge.inverse(x, xis), dtype=float)
    if dS_dx is not None:
        D, method = dge.derivative(u, xis)
        D = np.broadcast_to(D, (len(xis), dge.n, dge.p))
        xs = np.broadcast_to(dge.forward(u, xis), (len(xis), dge.n))
        return np.asarray(dS_dx(xs)) @ D, method

    def composite(uu, xi):
        return np.asarray(S(dge.forward(uu, xi)), dtype=float)

    return finite_difference_jacobian(composite, u, xis), "finite-difference"


def jacobian_sufficient_values(dge: DataGeneratingEquation, S: Callable, x, xis,
                               dS_dx: Optional[Callable] = None):
    """Vectorised :func:`jacobian_sufficient`; returns ``(values, flags, method)``."""
    if dge.inverse is None:
        raise InverseUnavailable(f"{dge.name}: no inverse map")
    x = dge.check_data(x)
    M, method = _statistic_derivative(dge, S, x, xis, dS_dx)
    if M.shape[-2:] != (dge.p, dge.p):
        raise DimensionError(f"statistic must be {dge.p}-dimensional, derivative has shape {M.shape[-2:]}")
    dets = np.abs(np.linalg.det(M))
    scale = np.prod(np.linalg.norm(M, axis=-1), axis=-1)
    flags = (dets < DEGENERATE_RTOL * scale) | (scale == 0)
    return dets, flags, method


def jacobian_sufficient(dge: DataGeneratingEquation, S: Callable, x, xi,
                        dS_dx: Optional[Callable] = None) -> JacobianResult:
    """``|det d S(G(u, xi)) / dxi|`` at ``u = G^{-1}(x, xi)``.

    With ``dS_dx`` (derivative of the statistic in the data, shape
    ``(..., p, n)``) the chain rule is used with the model's derivative;
    otherwise the composite map is differenced numerically.  A singular
    matrix triggers a :class:`SingularStatistic` warning and the (zero)
    value is still returned.
    """
    values, flags, method = jacobian_sufficient_values(dge, S, x, np.reshape(xi, (1, dge.p)), dS_dx)
    if flags[0]:
        warnings.warn(f"{dge.name}: statistic derivative is singular at xi={xi}", SingularStatistic,
                      stacklevel=2)
    return JacobianResult(value=float(values[0]), n_subsets=1, method=method,
                          condition_flag=bool(flags[0]))


# --------------------------------------------------------------------------
# Monte Carlo check of the sufficiency/ancillary representation


@dataclass(frozen=True)
class ConditionalReport:
    """Outcome of :func:`verify_conditional_representation`."""

    ks: float
    ks_by_coordinate: tuple[float, ...]
    delta: float
    n_accepted: int
    n_proposals: int
    n_solver_failures: int


def check_ancillary(dge: DataGeneratingEquation, A: Callable, rng: np.random.Generator,
                    n_noise: int = 20, n_params: int = 5, tol: float = 1e-8) -> None:
    """Raise :class:`NonAncillary` unless ``A(G(u, xi))`` is constant in ``xi``."""
    u = dge.sample_noise(rng, n_noise)
    lo, hi = np.array(dge.lo), np.array(dge.hi)
    xis = lo + (hi - lo) * rng.uniform(0.05, 0.95, size=(n_params, dge.p))
    ref = np.asarray(A(dge.forward(u, xis[0])), dtype=float)
    for xi in xis[1:]:
        a = np.asarray(A(dge.forward(u, xi)), dtype=float)
        err = np.max(np.abs(a - ref) / (1.0 + np.abs(ref)))
        if not err <= tol:
            raise NonAncillary(f"A(G(u, xi)) varies with xi (relative change {err:.3g} > {tol:g})")


def solve_statistic(dge: DataGeneratingEquation, S: Callable, s, u, grid, tol: float = 1e-10,
                    max_iter: int = 60):
    """Solve ``S(G(u, xi)) = s`` for ``xi`` separately for every noise row.

    A coarse pass over ``grid`` brackets each root, then damped Newton steps
    with a finite-difference derivative polish it.  Returns ``(xi, ok)``;
    rows whose residual does not fall below ``100 * tol`` inside the box
    are marked not ok.
    """
    s = np.asarray(s, dtype=float)
    u = np.atleast_2d(np.asarray(u, dtype=float))
    lo, hi = np.array(grid.lo), np.array(grid.hi)
    nodes = grid.coarsened(32).nodes
    B = len(u)
    xi = np.empty((B, dge.p))
    chunk = max(1, 2_000_000 // (len(nodes) * max(dge.n, dge.noise_dim)))
    with np.errstate(all="ignore"):
        for start in range(0, B, chunk):
            uu = u[start:start + chunk]
            vals = np.asarray(S(dge.forward(uu[:, None, :], nodes[None, :, :])), dtype=float)
            resid = np.linalg.norm(vals - s, axis=-1)
            resid = np.where(np.isfinite(resid), resid, np.inf)
            xi[start:start + chunk] = nodes[np.argmin(resid, axis=1)]

        def residual(x_):
            return np.asarray(S(dge.forward(u, x_)), dtype=float) - s

        def composite(uu, x_):
            return np.asarray(S(dge.forward(uu, x_)), dtype=float)

        r = residual(xi)
        rn = np.linalg.norm(r, axis=-1)
        scale = 1.0 + np.linalg.norm(s)
        for _ in range(max_iter):
            active = rn > tol * scale
            if not active.any():
                break
            Jm = finite_difference_jacobian(composite, u[active], xi[active])
            step = (np.linalg.pinv(Jm) @ r[active][..., None])[..., 0]
            cur = xi[active]
            cur_rn = rn[active]
            t = np.ones(len(cur))
            new = np.clip(cur - step, lo, hi)
            new_rn = np.linalg.norm(residual_rows(S, dge, u[active], new, s), axis=-1)
            for _ in range(20):
                worse = ~(new_rn < cur_rn)
                if not worse.any():
                    break
                t = np.where(worse, t / 2, t)
                new = np.where(worse[:, None], np.clip(cur - t[:, None] * step, lo, hi), new)
                new_rn = np.where(worse, np.linalg.norm(residual_rows(S, dge, u[active], new, s), axis=-1),
                                  new_rn)
            improved = new_rn < cur_rn
            if not improved.any():
                break
            upd = np.where(improved[:, None], new, cur)
            xi[active] = upd
            r[active] = residual_rows(S, dge, u[active], upd, s)
            rn[active] = np.linalg.norm(r[active], axis=-1)
    ok = np.isfinite(rn) & (rn <= 100 * tol * scale)
    return xi, ok


def residual_rows(S, dge, u, xi, s):
    return np.asarray(S(dge.forward(u, xi)), dtype=float) - s


def verify_conditional_representation(dge: DataGeneratingEquation, S: Callable, A: Optional[Callable], x,
                                      n_draws: int, seed, grid, dS_dx: Optional[Callable] = None,
                                      oversample: int = 10, min_accepted: int = 500) -> ConditionalReport:
    """Compare ``Q_s(U*) | A(U*) ~ a`` with the sufficient-statistic density.

    Noise vectors are drawn, the statistic equation is solved for each,
    and the ``max(n_draws, min_accepted)`` draws whose ancillary lies
    closest to the observed one are kept (``delta`` is the largest kept
    distance).  With ``A=None`` every solved draw is kept.  The kept
    solutions are compared with :func:`tabulate_gfd` using ``S`` by a
    Kolmogorov-Smirnov distance (largest over coordinates).
    """
    from .density import ks_distance, tabulate_gfd  # density imports this module

    rng = np.random.default_rng(seed)
    x = dge.check_data(x)
    n_keep = max(int(n_draws), min_accepted)
    if A is not None:
        check_ancillary(dge, A, rng)
    n_prop = n_keep * oversample if A is not None else n_keep
    u = dge.sample_noise(rng, n_prop)
    s = np.asarray(S(x), dtype=float)
    xi, ok = solve_statistic(dge, S, s, u, grid)
    n_fail = int((~ok).sum())
    if not ok.any():
        raise SolverFailure("no noise draw admits a solution of the statistic equation inside the box")
    xi_ok, u_ok = xi[ok], u[ok]
    if A is None:
        kept, delta = xi_ok, 0.0
    else:
        center = 0.5 * (np.array(dge.lo) + np.array(dge.hi))
        a_obs = np.asarray(A(x), dtype=float)
        a_sim = np.asarray(A(dge.forward(u_ok, center)), dtype=float)
        dist = np.linalg.norm(np.atleast_2d(a_sim - a_obs).reshape(len(u_ok), -1), axis=-1)
        order = np.argsort(dist, kind="stable")[:n_keep]
        kept, delta = xi_ok[order], float(dist[order[-1]])
    fd = tabulate_gfd(dge, x, grid, statistic=S, dS_dx=dS_dx, check_refinement=False)
    per = tuple(ks_distance(kept[:, j], fd.marginal(j) if dge.p > 1 else fd) for j in range(dge.p))
    return ConditionalReport(ks=max(per), ks_by_coordinate=per, delta=delta, n_accepted=len(kept),
                             n_proposals=n_prop, n_solver_failures=n_fail)
