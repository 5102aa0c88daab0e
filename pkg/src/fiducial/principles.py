"""Numerical checks on the conditionality and likelihood principles.

* :func:`check_slp_pair_sequential` estimates ``c(theta) = P_theta(O2 | O1)``
  for a fixed-sample event ``O1`` and a nested sequential-stopping event
  ``O2``.  The two outcomes form a likelihood-principle pair only if
  ``c`` is constant in ``theta``.
* :func:`check_separability` tests whether ``log J(x, xi)`` splits into
  ``a(x) + b(xi)``, in which case the fiducial density is a Bayes posterior
  with prior ``exp(b)``.
* :func:`wcp_demo` contrasts conditional and marginal fiducial draws in
  the two-instrument model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import isotonic_regression

from ._streams import run_workers
from .errors import ZeroJacobian
from .grid import ParameterGrid
from .jacobian import jacobian_values
from .model import DataGeneratingEquation, make_two_instrument
from .sampler import SampleSet, sample_gfd_eps

Z_THRESHOLD = 4.0
SEPARABILITY_TOL = 1e-8
MIN_CONDITIONING = 100


@dataclass
class SlpPairReport:
    theta: np.ndarray
    c: np.ndarray
    stderr: np.ndarray
    n_o1: np.ndarray
    n_o2: np.ndarray
    reps: int
    p_o1: np.ndarray
    p_o2: np.ndarray
    decomposition_error: np.ndarray
    p_o2_stderr: np.ndarray
    pooled_se: float
    spread: float
    constant_fit: float
    constant_max_z: float
    constant_rejected: bool
    isotonic_fit: np.ndarray
    isotonic_max_z: float
    isotonic_accepted: bool
    verdict: str
    gaps: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def fl(a):
            return [None if not np.isfinite(v) else float(v) for v in np.asarray(a, dtype=float)]
        return {
            "theta": fl(self.theta), "c": fl(self.c), "stderr": fl(self.stderr),
            "n_o1": [int(v) for v in self.n_o1], "n_o2": [int(v) for v in self.n_o2],
            "reps": int(self.reps), "p_o1": fl(self.p_o1), "p_o2": fl(self.p_o2),
            "decomposition_error": fl(self.decomposition_error), "p_o2_stderr": fl(self.p_o2_stderr),
            "pooled_se": float(self.pooled_se), "spread": float(self.spread),
            "constant_fit": float(self.constant_fit), "constant_max_z": float(self.constant_max_z),
            "constant_rejected": bool(self.constant_rejected), "isotonic_fit": fl(self.isotonic_fit),
            "isotonic_max_z": float(self.isotonic_max_z), "isotonic_accepted": bool(self.isotonic_accepted),
            "verdict": self.verdict, "gaps": [float(t) for t in self.gaps],
        }


def sequential_events(sigma: float = 1.0, k_max: int = 169, z: float = 1.96):
    """Event simulator for the fixed-n versus optional-stopping pair.

    ``O1``: the mean of ``k_max`` N(theta, sigma^2) draws exceeds
    ``z sigma / sqrt(k_max)``.  ``O2``: additionally, no earlier running
    mean crossed its own boundary ``z sigma / sqrt(k)``.
    """
    k = np.arange(1, k_max + 1)
    bound = z * sigma / np.sqrt(k)

    def simulate(rng, theta, size):
        y = rng.normal(theta, sigma, size=(size, k_max))
        means = np.cumsum(y, axis=1) / k
        o1 = means[:, -1] > bound[-1]
        o2 = o1 & np.all(means[:, :-1] <= bound[:-1], axis=1)
        return o1, o2

    simulate.chunk = max(1, 2_000_000 // k_max)
    return simulate


def _count_events(simulate, theta, reps, seed_seq):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    chunk = getattr(simulate, "chunk", 100_000)
    n1 = n2 = 0
    done = 0
    while done < reps:
        size = min(chunk, reps - done)
        o1, o2 = simulate(rng, theta, size)
        n1 += int(np.count_nonzero(o1))
        n2 += int(np.count_nonzero(o2 & o1))
        done += size
    return n1, n2


def check_slp_pair(simulate: Callable, theta_grid: Sequence[float], reps: int, seed,
                   workers: int = 1) -> SlpPairReport:
    """Test whether ``P_theta(O2 | O1)`` is constant over ``theta_grid``.

    ``simulate(rng, theta, size)`` returns boolean arrays ``(in_O1, in_O2)``.
    Each ``theta`` gets its own seeded stream, so results do not depend on
    the worker count.

    Standard errors use the binomial formula with the count shrunk by one
    half toward the middle, which keeps them positive when no ``O2`` event
    is seen.  A weighted constant fit is rejected when some point lies more
    than four standard errors from it; a weighted decreasing isotonic fit is
    accepted when every point lies within four.  The verdict is
    ``not-SLP-pair`` when the constant fit is rejected and the spread
    ``max c - min c`` also exceeds four pooled (root-mean-square) standard
    errors, ``SLP-pair`` when the constant fit stands, and
    ``inconclusive`` otherwise or when fewer than two grid points have at
    least 100 ``O1`` events.
    """
    theta = np.asarray(theta_grid, dtype=float)
    if theta.size == 0:
        raise ValueError("theta grid is empty")
    if reps < 1:
        raise ValueError("reps must be positive")
    seqs = np.random.SeedSequence(seed).spawn(len(theta))
    counts = run_workers(_count_events, [(simulate, t, reps, s) for t, s in zip(theta, seqs)], workers)
    n1 = np.array([c[0] for c in counts])
    n2 = np.array([c[1] for c in counts])
    gaps = [float(t) for t, k in zip(theta, n1) if k == 0]

    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(n1 > 0, n2 / np.maximum(n1, 1), np.nan)
        shrunk = (n2 + 0.5) / (n1 + 1.0)
        se = np.where(n1 > 0, np.sqrt(shrunk * (1 - shrunk) / np.maximum(n1, 1)), np.nan)
    p1 = n1 / reps
    p2 = n2 / reps
    decomposition = np.abs(p2 - np.nan_to_num(c) * p1)
    p2_se = np.sqrt(np.maximum(p2 * (1 - p2), 0.25 / reps) / reps)

    valid = np.isfinite(c)
    informative = valid & (n1 >= MIN_CONDITIONING)
    cv, sv = c[valid], se[valid]
    iso = np.full(len(theta), np.nan)
    if valid.sum() >= 1:
        w = 1.0 / sv**2
        const = float(np.sum(w * cv) / np.sum(w))
        const_z = float(np.max(np.abs(cv - const) / sv))
        iso_fit = isotonic_regression(cv, weights=w, increasing=False).x
        iso[valid] = iso_fit
        iso_z = float(np.max(np.abs(cv - iso_fit) / sv))
        pooled = float(np.sqrt(np.mean(sv**2)))
        spread = float(cv.max() - cv.min())
    else:
        const = const_z = iso_z = pooled = spread = float("nan")
    const_rejected = bool(const_z > Z_THRESHOLD)
    iso_accepted = bool(iso_z <= Z_THRESHOLD)

    if informative.sum() < 2:
        verdict = "inconclusive"
    elif const_rejected and spread > Z_THRESHOLD * pooled:
        verdict = "not-SLP-pair"
    elif not const_rejected:
        verdict = "SLP-pair"
    else:
        verdict = "inconclusive"
    return SlpPairReport(theta=theta, c=c, stderr=se, n_o1=n1, n_o2=n2, reps=int(reps), p_o1=p1, p_o2=p2,
                         decomposition_error=decomposition, p_o2_stderr=p2_se, pooled_se=pooled,
                         spread=spread, constant_fit=const, constant_max_z=const_z,
                         constant_rejected=const_rejected, isotonic_fit=iso, isotonic_max_z=iso_z,
                         isotonic_accepted=iso_accepted, verdict=verdict, gaps=gaps)


def check_slp_pair_sequential(sigma: float = 1.0, k_max: int = 169,
                              theta_grid: Sequence[float] = (0.0, 0.1, 0.2, 0.5, 1.0),
                              reps: int = 100_000, seed=0, workers: int = 1) -> SlpPairReport:
    """:func:`check_slp_pair` for the optional-stopping normal-mean construction."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    return check_slp_pair(sequential_events(sigma, k_max), theta_grid, reps, seed, workers)


# --------------------------------------------------------------------------


@dataclass
class SeparabilityReport:
    separable: bool
    max_second_difference: float
    log_prior: np.ndarray
    grid: ParameterGrid
    n_used_nodes: int

    def implied_prior(self) -> np.ndarray:
        """``g(xi)`` on the grid nodes, scaled to 1 at the first usable node."""
        return np.exp(self.log_prior)


def check_separability(dge: Optional[DataGeneratingEquation], datasets, grid: ParameterGrid,
                       jacobian_fn: Optional[Callable] = None, tol: float = SEPARABILITY_TOL
                       ) -> SeparabilityReport:
    """Does ``J(x, xi) = f(x) g(xi)`` hold over several data sets and the grid?

    ``log J`` is tabulated on (data sets) x (grid nodes) and every mixed
    second difference ``L[a, b] - L[a, 0] - L[0, b] + L[0, 0]`` must vanish
    to ``tol``.  ``jacobian_fn(x, xis)`` overrides the model's full
    Jacobian weight.
    """
    datasets = list(datasets)
    if len(datasets) < 2:
        raise ValueError("separability in x needs at least two distinct data sets")
    if jacobian_fn is None:
        if dge is None:
            raise ValueError("need a model or a jacobian_fn")

        def jacobian_fn(x, xis):
            return jacobian_values(dge, x, xis)[0]

    nodes = grid.nodes
    J = np.array([np.asarray(jacobian_fn(np.asarray(x, dtype=float), nodes), dtype=float) for x in datasets])
    usable = np.all(np.isfinite(J) & (J > 0), axis=0)
    if usable.mean() < 0.5:
        raise ZeroJacobian(f"J vanishes or is undefined on {100 * (1 - usable.mean()):.0f}% of the grid")
    L = np.log(J[:, usable])
    dd = L - L[:, :1] - L[:1, :] + L[0, 0]
    worst = float(np.max(np.abs(dd)))
    log_prior = np.full(len(nodes), np.nan)
    log_prior[usable] = L[0] - L[0, 0]
    return SeparabilityReport(separable=worst <= tol, max_second_difference=worst,
                              log_prior=log_prior.reshape(grid.shape), grid=grid,
                              n_used_nodes=int(usable.sum()))


# --------------------------------------------------------------------------


@dataclass
class WcpReport:
    ks_conditional: float
    ks_marginal: float
    conditional: SampleSet
    marginal: SampleSet
    table: dict

    def summary(self) -> dict:
        return {
            "ks_conditional": self.ks_conditional,
            "ks_marginal": self.ks_marginal,
            "n_conditional": len(self.conditional),
            "n_marginal": len(self.marginal),
            "acceptance_conditional": self.conditional.meta.acceptance_rate,
            "acceptance_marginal": self.marginal.meta.acceptance_rate,
        }


def mixture_cdf(x: float, sigma1: float, sigma2: float):
    def cdf(t):
        return 0.5 * stats.norm.cdf(t, x, sigma1) + 0.5 * stats.norm.cdf(t, x, sigma2)
    return cdf


def wcp_demo(sigma1: float, sigma2: float, x: float, m: int, n_draws: int, seed, workers: int = 1,
             bounds=(-100.0, 100.0), n_bins: int = 160) -> WcpReport:
    """Conditional versus marginal fiducial draws in the two-instrument model.

    With the instrument observed, exact conditioning on ``M = m`` leaves
    draws distributed as N(x, sigma_m^2); with it unobserved, the draws
    follow the equal mixture of N(x, sigma1^2) and N(x, sigma2^2).
    """
    if m not in (1, 2):
        raise ValueError(f"instrument must be 1 or 2, got {m!r}")
    cond_model = make_two_instrument(sigma1, sigma2, machine_observed=True, bounds=bounds)
    marg_model = make_two_instrument(sigma1, sigma2, machine_observed=False, bounds=bounds)
    cond = sample_gfd_eps(cond_model, [x, m], 0.0, n_draws, seed=[seed, 0], workers=workers)
    marg = sample_gfd_eps(marg_model, [x], 0.0, n_draws, seed=[seed, 1], workers=workers)
    sig_m = sigma1 if m == 1 else sigma2
    ks_c = float(stats.kstest(cond.draws[:, 0], stats.norm(x, sig_m).cdf).statistic)
    mix = mixture_cdf(x, sigma1, sigma2)
    ks_m = float(stats.kstest(marg.draws[:, 0], mix).statistic)

    edges = np.linspace(x - 4 * sigma2, x + 4 * sigma2, n_bins + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    cond_hist = np.histogram(cond.draws[:, 0], bins=edges)[0] / (len(cond) * np.diff(edges))
    marg_hist = np.histogram(marg.draws[:, 0], bins=edges)[0] / (len(marg) * np.diff(edges))
    table = {
        "theta": mids,
        "conditional_empirical": cond_hist,
        "conditional_reference": stats.norm.pdf(mids, x, sig_m),
        "marginal_empirical": marg_hist,
        "marginal_reference": 0.5 * stats.norm.pdf(mids, x, sigma1) + 0.5 * stats.norm.pdf(mids, x, sigma2),
    }
    return WcpReport(ks_conditional=ks_c, ks_marginal=ks_m, conditional=cond, marginal=marg, table=table)
