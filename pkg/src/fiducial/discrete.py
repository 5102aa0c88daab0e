"""Fiducial distribution-function envelopes for discrete models.

Inverting ``X = F^{-1}(U, xi)`` at a lattice observation gives a set of
parameter values rather than a point, so the fiducial CDF is only pinned
down between two bounds built from ``F(x, xi)`` and ``F(x-1, xi)``.  The
half correction takes their average.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidCdf, NotMonotone, QuantileOutOfRange
from .grid import ParameterGrid
from .model import P_MARGIN, DataGeneratingEquation, make_binomial, make_geometric

MONOTONE_TOL = 1e-12
DEFAULT_NODES = 10_000


def default_p_grid(count: int = DEFAULT_NODES) -> ParameterGrid:
    """Grid on (0, 1) with the endpoints excluded by ``P_MARGIN``."""
    return ParameterGrid((P_MARGIN,), (1 - P_MARGIN,), (count,))


@dataclass
class DiscreteFiducialBounds:
    xi: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    half: np.ndarray
    direction: str
    observed: float
    support: tuple[float, float] = (0.0, 1.0)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass(frozen=True)
class FiducialInterval:
    lo: float
    hi: float
    envelope_lo: float
    envelope_hi: float
    level: float

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def envelope_covers(self, value: float) -> bool:
        return self.envelope_lo <= value <= self.envelope_hi


def _direction(values: np.ndarray) -> Optional[str]:
    d = np.diff(values)
    up = np.all(d >= -MONOTONE_TOL)
    down = np.all(d <= MONOTONE_TOL)
    if up and down:
        return "flat"
    if up:
        return "increasing"
    if down:
        return "decreasing"
    return None


def discrete_bounds(F: Callable, x: float, grid, support: Optional[tuple[float, float]] = None
                    ) -> DiscreteFiducialBounds:
    """Envelope ``H_lower <= H <= H_upper`` of the fiducial CDF at observation ``x``.

    ``F(x, xi)`` is the data CDF evaluated at a vector of parameter values.
    If ``F(x, .)`` increases in ``xi`` the envelope is
    ``[F(x-1, xi), F(x, xi)]``; if it decreases it is
    ``[1 - F(x, xi), 1 - F(x-1, xi)]``.  ``half`` is the midpoint.
    """
    xi = grid.axis_nodes(0) if isinstance(grid, ParameterGrid) else np.asarray(grid, dtype=float)
    if xi.ndim != 1 or len(xi) < 2:
        raise ValueError("need a one-dimensional grid with at least two nodes")
    Fx = np.asarray(F(x, xi), dtype=float)
    Fm = np.asarray(F(x - 1, xi), dtype=float)
    for name, v in (("F(x)", Fx), ("F(x-1)", Fm)):
        if not np.all(np.isfinite(v)) or np.any(v < -MONOTONE_TOL) or np.any(v > 1 + MONOTONE_TOL):
            raise InvalidCdf(f"{name} leaves [0, 1] on the grid")
    if np.any(Fm > Fx + MONOTONE_TOL):
        raise InvalidCdf("F(x-1, xi) exceeds F(x, xi): not a distribution function in x")

    dx, dm = _direction(Fx), _direction(Fm)
    if dx is None or dm is None:
        raise NotMonotone("F is not monotone in the parameter at the observation")
    if dx == "flat":
        dx = dm
    if dx == "flat":
        raise NotMonotone("F(x, xi) and F(x-1, xi) are constant in xi; direction is undetermined")
    if dm not in ("flat", dx):
        raise NotMonotone("F(x, xi) and F(x-1, xi) move in opposite directions")

    if dx == "increasing":
        lower, upper = Fm, Fx
    else:
        lower, upper = 1.0 - Fx, 1.0 - Fm
    lower = np.clip(lower, 0.0, 1.0)
    upper = np.clip(upper, 0.0, 1.0)
    if support is None:
        support = (float(xi[0]), float(xi[-1]))
    return DiscreteFiducialBounds(xi=xi, lower=lower, upper=upper, half=0.5 * (lower + upper),
                                  direction=dx, observed=float(x), support=tuple(support))


def model_bounds(dge: DataGeneratingEquation, x, grid=None) -> DiscreteFiducialBounds:
    """:func:`discrete_bounds` for a built-in discrete model."""
    if dge.cdf is None:
        raise ValueError(f"{dge.name} has no CDF; envelopes need a discrete inverse-CDF model")
    x = float(np.asarray(x).ravel()[0])
    if grid is None:
        grid = ParameterGrid(dge.lo, dge.hi, (DEFAULT_NODES,))
    return discrete_bounds(dge.cdf, x, grid, support=(dge.support[0][0], dge.support[1][0]))


def _invert(H, xi, q, support, name):
    cell = float(xi[1] - xi[0])
    hit = np.flatnonzero(H >= q)
    if len(hit) == 0:
        # unreached mass can only sit at the top of the parameter range
        if support[1] - xi[-1] <= cell:
            return float(support[1])
        raise QuantileOutOfRange(f"{name} stays below {q:.6g} on the grid")
    i = int(hit[0])
    if i == 0:
        if H[0] == q:
            return float(xi[0])
        if xi[0] - support[0] <= cell:
            return float(support[0])
        raise QuantileOutOfRange(f"{name} already exceeds {q:.6g} at the first grid node")
    h0, h1 = H[i - 1], H[i]
    t = (q - h0) / (h1 - h0) if h1 > h0 else 1.0
    return float(xi[i - 1] + t * (xi[i] - xi[i - 1]))


def half_corrected_interval(bounds: DiscreteFiducialBounds, level: float) -> FiducialInterval:
    """Equal-tailed interval from the half-corrected CDF, plus the envelope interval.

    The envelope interval takes its lower end from ``upper`` and its upper
    end from ``lower`` and therefore always contains the half-corrected one.
    When a CDF does not reach a tail level on the grid but the grid runs up
    to the natural edge of the parameter range, the edge is returned;
    otherwise :class:`QuantileOutOfRange` is raised.
    """
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    a = (1.0 - level) / 2.0
    b = bounds
    return FiducialInterval(
        lo=_invert(b.half, b.xi, a, b.support, "H"),
        hi=_invert(b.half, b.xi, 1.0 - a, b.support, "H"),
        envelope_lo=_invert(b.upper, b.xi, a, b.support, "H_upper"),
        envelope_hi=_invert(b.lower, b.xi, 1.0 - a, b.support, "H_lower"),
        level=level,
    )


@dataclass
class SlpDemoReport:
    """Geometric (N = n) versus binomial (n trials, X = 1) fiducial envelopes."""

    n: int
    geometric: DiscreteFiducialBounds
    binomial: DiscreteFiducialBounds
    upper_gap: float
    lower_gap: float
    half_gap: float
    half_gap_at: float
    upper_bounds_coincide: bool
    lower_bounds_differ: bool

    @property
    def p(self) -> np.ndarray:
        return self.geometric.xi

    @property
    def width_geometric(self) -> np.ndarray:
        return self.geometric.width

    @property
    def width_binomial(self) -> np.ndarray:
        return self.binomial.width

    def summary(self) -> dict:
        return {
            "n": self.n,
            "upper_gap": self.upper_gap,
            "lower_gap": self.lower_gap,
            "half_gap": self.half_gap,
            "half_gap_at": self.half_gap_at,
            "max_width_geometric": float(self.width_geometric.max()),
            "max_width_binomial": float(self.width_binomial.max()),
            "upper_bounds_coincide": self.upper_bounds_coincide,
            "lower_bounds_differ": self.lower_bounds_differ,
        }


def slp_violation_demo(n: int, grid=None) -> SlpDemoReport:
    """Compare the fiducial envelopes of two experiments with proportional likelihoods.

    Observing ``N = n`` under a geometric model and ``X = 1`` under a
    binomial model with ``n`` trials gives likelihoods proportional in
    ``p``, yet the envelopes differ in their lower bounds.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    if grid is None:
        grid = default_p_grid()
    geo = model_bounds(make_geometric(), n, grid)
    bino = model_bounds(make_binomial(n), 1, grid)
    upper_gap = float(np.max(np.abs(geo.upper - bino.upper)))
    lower_gap = float(np.max(np.abs(geo.lower - bino.lower)))
    diff = geo.half - bino.half
    k = int(np.argmax(np.abs(diff)))
    return SlpDemoReport(
        n=n, geometric=geo, binomial=bino, upper_gap=upper_gap, lower_gap=lower_gap,
        half_gap=float(abs(diff[k])), half_gap_at=float(geo.xi[k]),
        upper_bounds_coincide=upper_gap <= 1e-12, lower_bounds_differ=lower_gap > 1e-12,
    )
