"""Tabulated fiducial densities on a parameter grid.

The continuous generalized fiducial density is proportional to the
likelihood times the Jacobian weight; it is evaluated in log space at every
grid node and normalised with the midpoint rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .errors import DimensionError, FiducialError, NonIntegrable, NotMonotone
from .grid import ParameterGrid
from .jacobian import jacobian_sufficient_values, jacobian_values
from .model import DataGeneratingEquation

REFINEMENT_RTOL = 1e-3


@dataclass
class FiducialDensity:
    """Normalised density values at the nodes of ``grid``.

    ``values`` has shape ``grid.shape``.  Within each cell the density is
    treated as constant, so the p=1 CDF is piecewise linear between cell
    edges and runs exactly from 0 to 1.
    """

    grid: ParameterGrid
    values: np.ndarray
    log_normalizer: float = 0.0
    n_failed: int = 0
    jacobian: str = "full"
    log_likelihood_fn: Optional[Callable] = None
    jacobian_fn: Optional[Callable] = None

    @classmethod
    def from_values(cls, grid: ParameterGrid, values, **kw) -> "FiducialDensity":
        """Normalise arbitrary nonnegative node values."""
        values = np.asarray(values, dtype=float).reshape(grid.shape)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("density values must be finite and nonnegative")
        total = values.sum() * grid.cell_volume
        if not total > 0:
            raise NonIntegrable("density integrates to zero on the grid")
        return cls(grid, values / total, log_normalizer=float(np.log(total)), **kw)

    @property
    def normalizer(self) -> float:
        return float(np.exp(self.log_normalizer))

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def marginal(self, axis: int) -> "FiducialDensity":
        g = self.grid
        other = tuple(j for j in range(g.ndim) if j != axis)
        w = np.prod([g.widths[j] for j in other]) if other else 1.0
        vals = self.values.sum(axis=other) * w if other else self.values
        mg = ParameterGrid((g.lo[axis],), (g.hi[axis],), (g.counts[axis],))
        return FiducialDensity(mg, np.asarray(vals), self.log_normalizer, jacobian=self.jacobian)

    def _require_1d(self):
        if self.grid.ndim != 1:
            raise DimensionError(f"operation needs a one-parameter density, grid has {self.grid.ndim} axes")

    def cdf_edges(self) -> tuple[np.ndarray, np.ndarray]:
        self._require_1d()
        edges = self.grid.axis_edges(0)
        cum = np.concatenate([[0.0], np.cumsum(self.values * self.grid.widths[0])])
        cum /= cum[-1]
        return edges, np.maximum.accumulate(cum)

    def cdf(self, t) -> np.ndarray:
        edges, cum = self.cdf_edges()
        return np.interp(t, edges, cum, left=0.0, right=1.0)

    def quantile(self, q) -> np.ndarray:
        """Inverse of the piecewise-linear CDF; flat stretches map to their left end."""
        edges, cum = self.cdf_edges()
        q = np.asarray(q, dtype=float)
        if np.any((q < 0) | (q > 1)):
            raise ValueError("quantile level must lie in [0, 1]")
        i = np.clip(np.searchsorted(cum, q, side="left"), 1, len(cum) - 1)
        lo_c, hi_c = cum[i - 1], cum[i]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(hi_c > lo_c, (q - lo_c) / (hi_c - lo_c), 0.0)
        return edges[i - 1] + frac * (edges[i] - edges[i - 1])


def _normalize_log(log_w: np.ndarray, grid: ParameterGrid):
    finite = np.isfinite(log_w)
    if not finite.any():
        raise NonIntegrable("likelihood times Jacobian vanishes at every grid node")
    top = log_w[finite].max()
    w = np.where(finite, np.exp(np.where(finite, log_w - top, 0.0)), 0.0)
    total = w.sum() * grid.cell_volume
    if not (np.isfinite(total) and total > 0):
        raise NonIntegrable("normalising integral is zero or not finite")
    return w / total, float(top + np.log(total))


def _gfd_log_weights(dge, x, grid, jacobian_fn):
    nodes = grid.nodes
    with np.errstate(divide="ignore", invalid="ignore"):
        log_f = np.asarray(dge.log_likelihood(x, nodes), dtype=float)
        J = np.asarray(jacobian_fn(x, nodes), dtype=float)
        failed = ~np.isfinite(J)
        log_w = np.where(failed, -np.inf, log_f + np.log(np.where(failed, 0.0, J)))
    log_w = np.where(np.isnan(log_w), -np.inf, log_w)
    return log_w, int(failed.sum())


def _tabulate(dge, x, grid, jacobian_fn, label, check_refinement):
    if dge.log_likelihood is None:
        raise FiducialError(f"{dge.name}: no likelihood available")
    x = dge.check_data(x)
    if grid.ndim != dge.p:
        raise DimensionError(f"grid has {grid.ndim} axes but the model has p={dge.p}")
    log_w, n_failed = _gfd_log_weights(dge, x, grid, jacobian_fn)
    values, log_norm = _normalize_log(log_w, grid)
    if check_refinement:
        fine = grid.refined(2)
        log_w2, _ = _gfd_log_weights(dge, x, fine, jacobian_fn)
        _, log_norm2 = _normalize_log(log_w2, fine)
        change = abs(np.expm1(log_norm2 - log_norm))
        if change > REFINEMENT_RTOL:
            raise NonIntegrable(f"normaliser changes by {change:.2e} when the grid is refined; "
                                "widen the box or add nodes")
    return FiducialDensity(grid, values.reshape(grid.shape), log_norm, n_failed, label,
                           dge.log_likelihood, jacobian_fn)


def tabulate_gfd(dge: DataGeneratingEquation, x, grid: ParameterGrid, statistic: Optional[Callable] = None,
                 dS_dx: Optional[Callable] = None, check_refinement: bool = True) -> FiducialDensity:
    """Generalized fiducial density ``f(x, xi) J(x, xi) / normaliser`` on ``grid``.

    Parameters
    ----------
    dge : DataGeneratingEquation
        Must provide ``inverse`` and ``log_likelihood``.
    x : array_like
        Observed data of length ``dge.n``.
    grid : ParameterGrid
        Quadrature grid with ``dge.p`` axes.
    statistic : callable, optional
        A ``p``-dimensional sufficient statistic.  When given, the
        single-determinant weight of the statistic is used instead of the
        full subdeterminant sum.
    dS_dx : callable, optional
        Data derivative of ``statistic`` for the chain-rule path.
    check_refinement : bool
        Recompute the normaliser on a grid with doubled counts and raise
        :class:`NonIntegrable` if it moves by more than 1e-3 relatively.

    Nodes where the inverse breaks down get zero weight; their count is
    reported as ``n_failed``.
    """
    if statistic is None:
        def jac(xx, xis):
            return jacobian_values(dge, xx, xis)[0]
        label = "full"
    else:
        def jac(xx, xis):
            return jacobian_sufficient_values(dge, statistic, xx, xis, dS_dx)[0]
        label = "sufficient"
    return _tabulate(dge, x, grid, jac, label, check_refinement)


def tabulate_posterior(dge: DataGeneratingEquation, x, grid: ParameterGrid, log_prior,
                       check_refinement: bool = False) -> FiducialDensity:
    """Bayes posterior with an (improper) prior.

    ``log_prior`` is either a callable ``log_prior(xis)`` or an array of log
    prior values at the nodes of ``grid`` (NaN for excluded nodes).
    """
    if callable(log_prior):
        def prior_weight(xx, xis):
            return np.exp(log_prior(xis))
    else:
        table = np.asarray(log_prior, dtype=float).ravel()
        if table.size != grid.size:
            raise DimensionError("tabulated log prior does not match the grid")
        if check_refinement:
            raise ValueError("a tabulated prior cannot be evaluated on a refined grid")

        def prior_weight(xx, xis):
            return np.where(np.isfinite(table), np.exp(table), np.nan)
    return _tabulate(dge, x, grid, prior_weight, "prior", check_refinement)


def fisher_fiducial(F: Callable, x: float, grid: ParameterGrid, rel_step: float = 1e-5) -> FiducialDensity:
    """Single-observation fiducial density ``-dF(x, theta)/dtheta``.

    ``F(x, theta)`` must be decreasing in ``theta`` on the grid; the
    derivative is taken by central differences and renormalised.
    """
    if grid.ndim != 1:
        raise DimensionError("the single-observation fiducial density is one-parameter only")
    theta = grid.axis_nodes(0)
    Fv = np.asarray(F(x, theta), dtype=float)
    rise = np.diff(Fv)
    if np.any(rise > 1e-12):
        i = int(np.argmax(rise > 1e-12))
        raise NotMonotone(f"F(x, theta) increases between theta={theta[i]:.6g} and {theta[i + 1]:.6g}")
    h = rel_step * (1.0 + np.abs(theta))
    deriv = -(np.asarray(F(x, theta + h)) - np.asarray(F(x, theta - h))) / (2 * h)
    fd = FiducialDensity.from_values(grid, np.maximum(deriv, 0.0), jacobian="fisher")
    return fd


def density_cdf_quantile(fd: FiducialDensity, q: float) -> float:
    """Grid-interpolated quantile of a one-parameter tabulated density."""
    if fd.grid.ndim != 1:
        raise DimensionError(f"quantiles need p=1, density has {fd.grid.ndim} parameters")
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    return float(fd.quantile(q))


def ks_distance(samples, fd: FiducialDensity, weights=None) -> float:
    """Kolmogorov-Smirnov distance between draws and a tabulated density.

    For multi-parameter densities the largest of the per-coordinate
    marginal distances is returned.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    out = 0.0
    for j in range(fd.grid.ndim):
        marg = fd.marginal(j) if fd.grid.ndim > 1 else fd
        col = samples[:, j]
        if weights is None:
            d = stats.kstest(col, marg.cdf).statistic
        else:
            d = _weighted_ks(col, np.asarray(weights, dtype=float), marg.cdf)
        out = max(out, float(d))
    return out


def _weighted_ks(values, weights, cdf):
    order = np.argsort(values, kind="stable")
    v = values[order]
    w = weights[order] / weights.sum()
    upper = np.cumsum(w)
    lower = upper - w
    F = cdf(v)
    return max(np.max(np.abs(upper - F)), np.max(np.abs(F - lower)))
