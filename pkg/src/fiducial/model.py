"""Data-generating equations ``X = G(U, xi)`` and the built-in models.

Batching convention used throughout the package: ``forward(u, xi)`` accepts
``u`` of shape ``(..., noise_dim)`` and ``xi`` of shape ``(..., p)`` with
broadcastable leading dimensions and returns data of shape ``(..., n)``.
``inverse(x, xi)`` maps data ``(n,)`` and parameters ``(..., p)`` to noise
``(..., noise_dim)``.  ``d_forward_d_xi(u, xi)`` returns ``(..., n, p)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .errors import DimensionError
from .grid import ParameterGrid

Array = np.ndarray


def finite_difference_jacobian(forward: Callable, u: Array, xi: Array) -> Array:
    """Central differences of ``forward`` in ``xi`` with step ``1e-6 (1 + |xi_j|)``."""
    u = np.asarray(u, dtype=float)
    xi = np.asarray(xi, dtype=float)
    p = xi.shape[-1]
    cols = []
    for j in range(p):
        h = 1e-6 * (1.0 + np.abs(xi[..., j:j + 1]))
        step = np.zeros(p)
        step[j] = 1.0
        up = forward(u, xi + h * step)
        down = forward(u, xi - h * step)
        cols.append((up - down) / (2.0 * h))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class DataGeneratingEquation:
    """A model ``X = G(U, xi)`` with a parameter-free noise law.

    ``noise_sampler(rng, size)`` draws ``size`` noise vectors; it never sees
    the parameter.  ``fit`` is an optional exact closest-fit solver for the
    Euclidean norm, ``fit(u, x) -> (xi, distance)`` over the parameter box,
    used by the epsilon sampler in place of grid search when available.
    ``cdf(x, xi)`` is required for discrete (inverse-CDF) models.
    """

    name: str
    n: int
    p: int
    noise_dim: int
    forward: Callable[[Array, Array], Array]
    noise_sampler: Callable[[np.random.Generator, int], Array]
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    param_names: tuple[str, ...] = ()
    inverse: Optional[Callable[[Array, Array], Array]] = None
    d_forward_d_xi: Optional[Callable[[Array, Array], Array]] = None
    log_likelihood: Optional[Callable[[Array, Array], Array]] = None
    cdf: Optional[Callable[[Array, Array], Array]] = None
    fit: Optional[Callable[[Array, Array], tuple[Array, Array]]] = None
    discrete: bool = False
    support: Optional[tuple[tuple[float, ...], tuple[float, ...]]] = None
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.noise_dim < 1:
            raise ValueError("n, p and noise_dim must be positive")
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != self.p or len(hi) != self.p:
            raise ValueError("param_space bounds must have length p")
        if not all(np.isfinite(a) and np.isfinite(b) and a < b for a, b in zip(lo, hi)):
            raise ValueError("param_space must be a finite box with lo < hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if not self.param_names:
            object.__setattr__(self, "param_names", tuple(f"xi{j}" for j in range(self.p)))
        if self.support is None:
            object.__setattr__(self, "support", (lo, hi))

    def sample_noise(self, rng: np.random.Generator, size: int) -> Array:
        u = np.asarray(self.noise_sampler(rng, size), dtype=float)
        return u.reshape(size, self.noise_dim)

    def derivative(self, u: Array, xi: Array) -> tuple[Array, str]:
        """Derivative matrix ``dG/dxi`` and the method used to get it."""
        if self.d_forward_d_xi is not None:
            return np.asarray(self.d_forward_d_xi(u, xi), dtype=float), "analytic"
        return finite_difference_jacobian(self.forward, u, xi), "finite-difference"

    def in_space(self, xi: Array) -> Array:
        xi = np.asarray(xi, dtype=float)
        return np.all((xi >= np.array(self.lo)) & (xi <= np.array(self.hi)), axis=-1)

    def grid(self, counts) -> ParameterGrid:
        """Grid over the full parameter box."""
        return ParameterGrid.from_box(self.lo, self.hi, counts)

    def check_data(self, x) -> Array:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.n,):
            raise DimensionError(f"{self.name}: expected data of length {self.n}, got shape {x.shape}")
        return x


def _std_normal(dim):
    def sampler(rng, size):
        return rng.standard_normal((size, dim))
    return sampler


def _uniform(rng, size):
    return rng.random((size, 1))


def _clip_box(v, a, b):
    return np.minimum(np.maximum(v, a), b)


# --------------------------------------------------------------------------
# continuous models


def make_normal_location_scale(n: int, bounds=((-100.0, 1e-6), (100.0, 100.0))) -> DataGeneratingEquation:
    """``X_i = mu + sigma U_i`` with ``U_i`` iid standard normal, ``xi = (mu, sigma)``."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    lo, hi = tuple(bounds[0]), tuple(bounds[1])
    if lo[1] <= 0:
        raise ValueError("sigma lower bound must be positive")

    def forward(u, xi):
        xi = np.asarray(xi, dtype=float)
        return xi[..., 0:1] + xi[..., 1:2] * np.asarray(u, dtype=float)

    def inverse(x, xi):
        xi = np.asarray(xi, dtype=float)
        return (np.asarray(x, dtype=float) - xi[..., 0:1]) / xi[..., 1:2]

    def d_forward(u, xi):
        u = np.asarray(u, dtype=float)
        xi = np.asarray(xi, dtype=float)
        u = np.broadcast_to(u, np.broadcast_shapes(u.shape, xi.shape[:-1] + (n,)))
        return np.stack([np.ones_like(u), u], axis=-1)

    def log_likelihood(x, xi):
        xi = np.atleast_2d(xi)
        z = (np.asarray(x)[None, :] - xi[:, 0:1]) / xi[:, 1:2]
        return stats.norm.logpdf(z).sum(axis=-1) - n * np.log(xi[:, 1])

    def fit(u, x):
        # exact box-constrained least squares; the objective is a convex
        # quadratic in (mu, sigma), so the minimiser is the interior
        # stationary point or lies on an edge where the 1-d optimum is a clip
        u = np.atleast_2d(np.asarray(u, dtype=float))
        x = np.asarray(x, dtype=float)
        ub = u.mean(axis=-1)
        xb = x.mean()
        uc = u - ub[:, None]
        suu = np.einsum("ij,ij->i", uc, uc)
        sxu = uc @ (x - xb)
        uu = np.einsum("ij,ij->i", u, u)

        def sse(mu, s):
            r = x[None, :] - mu[:, None] - s[:, None] * u
            return np.einsum("ij,ij->i", r, r)

        with np.errstate(divide="ignore", invalid="ignore"):
            s0 = np.where(suu > 0, sxu / suu, 0.0)
        mu0 = xb - s0 * ub
        feasible = (s0 >= lo[1]) & (s0 <= hi[1]) & (mu0 >= lo[0]) & (mu0 <= hi[0])
        cands = []
        for s_edge in (lo[1], hi[1]):
            s = np.full_like(ub, s_edge)
            cands.append((_clip_box(xb - s * ub, lo[0], hi[0]), s))
        for m_edge in (lo[0], hi[0]):
            mu = np.full_like(ub, m_edge)
            with np.errstate(divide="ignore", invalid="ignore"):
                s = np.where(uu > 0, ((x[None, :] - m_edge) * u).sum(-1) / uu, lo[1])
            cands.append((mu, _clip_box(s, lo[1], hi[1])))
        best_mu, best_s = cands[0]
        best = sse(best_mu, best_s)
        for mu, s in cands[1:]:
            v = sse(mu, s)
            take = v < best
            best_mu = np.where(take, mu, best_mu)
            best_s = np.where(take, s, best_s)
            best = np.where(take, v, best)
        v0 = sse(mu0, s0)
        take = feasible & (v0 <= best)
        best_mu = np.where(take, mu0, best_mu)
        best_s = np.where(take, s0, best_s)
        best = np.where(take, v0, best)
        return np.stack([best_mu, best_s], axis=-1), np.sqrt(np.maximum(best, 0.0))

    return DataGeneratingEquation(
        name="normal-ls", n=n, p=2, noise_dim=n, forward=forward,
        noise_sampler=_std_normal(n), lo=lo, hi=hi, param_names=("mu", "sigma"),
        inverse=inverse, d_forward_d_xi=d_forward, log_likelihood=log_likelihood,
        fit=fit, info={"n": n},
    )


def make_location(n: int = 1, scale: float = 1.0, bounds=(-100.0, 100.0)) -> DataGeneratingEquation:
    """``X_i = theta + scale U_i`` with standard normal noise and known scale."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not scale > 0:
        raise ValueError("scale must be positive")
    n = int(n)

    def forward(u, xi):
        return np.asarray(xi, dtype=float)[..., 0:1] + scale * np.asarray(u, dtype=float)

    def inverse(x, xi):
        return (np.asarray(x, dtype=float) - np.asarray(xi, dtype=float)[..., 0:1]) / scale

    def d_forward(u, xi):
        lead = np.broadcast_shapes(np.shape(u)[:-1], np.shape(xi)[:-1])
        return np.ones(lead + (n, 1))

    def log_likelihood(x, xi):
        xi = np.atleast_2d(xi)
        z = (np.asarray(x)[None, :] - xi[:, 0:1]) / scale
        return stats.norm.logpdf(z).sum(axis=-1) - n * np.log(scale)

    def fit(u, x):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        theta = _clip_box((np.asarray(x)[None, :] - scale * u).mean(axis=-1), bounds[0], bounds[1])
        r = np.asarray(x)[None, :] - theta[:, None] - scale * u
        return theta[:, None], np.sqrt(np.einsum("ij,ij->i", r, r))

    return DataGeneratingEquation(
        name="location", n=n, p=1, noise_dim=n, forward=forward,
        noise_sampler=_std_normal(n), lo=(bounds[0],), hi=(bounds[1],),
        param_names=("theta",), inverse=inverse, d_forward_d_xi=d_forward,
        log_likelihood=log_likelihood, fit=fit, info={"n": n, "scale": scale},
    )


def make_two_instrument(sigma1: float, sigma2: float, machine_observed: bool = True,
                        bounds=(-100.0, 100.0)) -> DataGeneratingEquation:
    """Two measuring instruments chosen by a fair coin.

    Noise is ``(U, Z)`` with ``U`` uniform and ``Z`` standard normal;
    ``M = 1 + 1{U < 1/2}`` and ``X = theta + sigma_M Z``.  Data are ``(X, M)``
    when the instrument is observed and ``(X,)`` otherwise.
    """
    if not (sigma1 > 0 and sigma2 > 0):
        raise ValueError("instrument precisions must be positive")
    if not sigma1 < sigma2:
        raise ValueError(f"need sigma1 < sigma2, got {sigma1} >= {sigma2}")
    sig = np.array([sigma1, sigma2], dtype=float)

    def machine(u):
        return 1 + (np.asarray(u)[..., 0] < 0.5).astype(int)

    def forward(u, xi):
        u = np.asarray(u, dtype=float)
        m = machine(u)
        x = np.asarray(xi, dtype=float)[..., 0] + sig[m - 1] * u[..., 1]
        if machine_observed:
            x, m = np.broadcast_arrays(x, m)
            return np.stack([x, m.astype(float)], axis=-1)
        return x[..., None]

    def noise(rng, size):
        return np.column_stack([rng.random(size), rng.standard_normal(size)])

    def fit(u, x):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        m = machine(u)
        shift = sig[m - 1] * u[:, 1]
        raw = x[0] - shift
        theta = _clip_box(raw, bounds[0], bounds[1])
        # residual is structurally zero unless the box clips theta
        rx = np.where(theta == raw, 0.0, x[0] - theta - shift)
        rm = (x[1] - m) if machine_observed else 0.0
        return theta[:, None], np.sqrt(rx * rx + rm * rm)

    def log_likelihood(x, xi):
        xi = np.atleast_2d(xi)
        if machine_observed:
            s = sig[int(x[1]) - 1]
            return np.log(0.5) + stats.norm.logpdf(x[0], xi[:, 0], s)
        return np.logaddexp(np.log(0.5) + stats.norm.logpdf(x[0], xi[:, 0], sig[0]),
                            np.log(0.5) + stats.norm.logpdf(x[0], xi[:, 0], sig[1]))

    return DataGeneratingEquation(
        name="two-instrument" if machine_observed else "two-instrument-marginal",
        n=2 if machine_observed else 1, p=1, noise_dim=2, forward=forward,
        noise_sampler=noise, lo=(bounds[0],), hi=(bounds[1],), param_names=("theta",),
        log_likelihood=log_likelihood, fit=fit,
        info={"sigma1": float(sigma1), "sigma2": float(sigma2), "machine_observed": machine_observed},
    )


# --------------------------------------------------------------------------
# discrete inverse-CDF models

P_MARGIN = 1e-6


def _geom_cdf(x, p):
    x = np.floor(np.asarray(x, dtype=float))
    p = np.asarray(p, dtype=float)
    with np.errstate(invalid="ignore"):
        val = -np.expm1(np.maximum(x, 0.0) * np.log1p(-p))
    return np.where(x >= 1, val, 0.0)


def make_geometric() -> DataGeneratingEquation:
    """Number of Bernoulli(p) trials up to and including the first success.

    ``X = inf{x : F(x, p) >= u}`` with ``F(x, p) = 1 - (1 - p)^x``.
    """

    def forward(u, xi):
        u = np.asarray(u, dtype=float)[..., 0]
        p = np.asarray(xi, dtype=float)[..., 0]
        u, p = np.broadcast_arrays(u, p)
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.ceil(np.log1p(-u) / np.log1p(-p))
        k = np.where(np.isfinite(k), k, 1.0)
        k = np.maximum(k, 1.0)
        # the log ratio can be off by one at exact lattice hits
        k = np.where((k > 1) & (_geom_cdf(k - 1, p) >= u), k - 1, k)
        k = np.where(_geom_cdf(k, p) < u, k + 1, k)
        return k[..., None]

    def cdf(x, xi):
        return _geom_cdf(x, xi)

    def log_likelihood(x, xi):
        p = np.atleast_2d(xi)[:, 0]
        k = float(np.asarray(x).ravel()[0])
        if k < 1 or k != np.floor(k):
            return np.full(p.shape, -np.inf)
        return (k - 1) * np.log1p(-p) + np.log(p)

    return DataGeneratingEquation(
        name="geometric", n=1, p=1, noise_dim=1, forward=forward, noise_sampler=_uniform,
        lo=(P_MARGIN,), hi=(1 - P_MARGIN,), param_names=("p",), cdf=cdf,
        log_likelihood=log_likelihood, discrete=True, support=((0.0,), (1.0,)),
    )


def make_binomial(trials: int) -> DataGeneratingEquation:
    """Successes in ``trials`` Bernoulli(p) trials, via the inverse CDF."""
    if int(trials) != trials or trials < 1:
        raise ValueError(f"trials must be a positive integer, got {trials!r}")
    trials = int(trials)

    def forward(u, xi):
        u = np.asarray(u, dtype=float)[..., 0]
        p = np.asarray(xi, dtype=float)[..., 0]
        return stats.binom.ppf(u, trials, p)[..., None]

    def cdf(x, xi):
        return stats.binom.cdf(np.floor(np.asarray(x, dtype=float)), trials, np.asarray(xi, dtype=float))

    def log_likelihood(x, xi):
        p = np.atleast_2d(xi)[:, 0]
        return stats.binom.logpmf(np.asarray(x).ravel()[0], trials, p)

    return DataGeneratingEquation(
        name="binomial", n=1, p=1, noise_dim=1, forward=forward, noise_sampler=_uniform,
        lo=(P_MARGIN,), hi=(1 - P_MARGIN,), param_names=("p",), cdf=cdf,
        log_likelihood=log_likelihood, discrete=True, support=((0.0,), (1.0,)),
        info={"trials": trials},
    )


# --------------------------------------------------------------------------
# statistics for the normal location-scale family


def sample_mean(x):
    return np.mean(x, axis=-1, keepdims=True)


def sample_mean_sd(x):
    """``(mean, sd)`` with the n-1 divisor; a sufficient statistic for normal data."""
    x = np.asarray(x, dtype=float)
    return np.stack([x.mean(axis=-1), x.std(axis=-1, ddof=1)], axis=-1)


def d_sample_mean_sd(x):
    """Derivative of :func:`sample_mean_sd` with respect to the data, ``(..., 2, n)``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    sd = x.std(axis=-1, ddof=1, keepdims=True)
    d_mean = np.full(x.shape, 1.0 / n)
    d_sd = (x - x.mean(axis=-1, keepdims=True)) / ((n - 1) * sd)
    return np.stack([d_mean, d_sd], axis=-2)


def standardized_residuals(x):
    """``(x - mean) / sd``; ancillary for any location-scale family."""
    x = np.asarray(x, dtype=float)
    return (x - x.mean(axis=-1, keepdims=True)) / x.std(axis=-1, ddof=1, keepdims=True)
