"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import itertools
import math
import time

import numpy as np
from scipy import stats

from fiducial.coverage import run_coverage_levels
from fiducial.density import fisher_fiducial, ks_distance, tabulate_gfd
from fiducial.discrete import default_p_grid, slp_violation_demo
from fiducial.grid import ParameterGrid
from fiducial.jacobian import jacobian_full
from fiducial.model import make_geometric, make_location, make_normal_location_scale
from fiducial.principles import check_slp_pair_sequential, wcp_demo
from fiducial.sampler import sample_gfd_ladder


def laplace_det(m):
    if len(m) == 1:
        return m[0][0]
    return sum((-1) ** j * m[0][j] * laplace_det([row[:j] + row[j + 1:] for row in m[1:]]) for j in range(len(m)))


def test_slp_violation_discrete(record_criterion):
    t0 = time.perf_counter()
    at_half = slp_violation_demo(3, np.array([0.25, 0.5, 0.75]))
    rep = slp_violation_demo(3, default_p_grid())
    elapsed = time.perf_counter() - t0
    geo, bino = at_half.geometric.half[1], at_half.binomial.half[1]
    ok = (abs(geo - 0.8125) < 1e-12 and abs(bino - 0.6875) < 1e-12 and rep.half_gap > 0.1
          and rep.upper_gap <= 1e-12 and elapsed < 1.0)
    record_criterion(1, "SLP violation (discrete)", ok,
                     f"H_geo(0.5)={geo:.12g} H_bin(0.5)={bino:.12g} sup gap={rep.half_gap:.4f} "
                     f"upper gap={rep.upper_gap:.1e} time={elapsed:.2f}s")
    assert ok


def test_wcp_demonstration(record_criterion):
    t0 = time.perf_counter()
    reps = {m: wcp_demo(1.0, 10.0, 0.0, m, 10_000, seed=2024 + m, bounds=(-200.0, 200.0)) for m in (1, 2)}
    elapsed = time.perf_counter() - t0
    ks = {f"cond m={m}": r.ks_conditional for m, r in reps.items()}
    ks.update({f"marg (seed {m})": r.ks_marginal for m, r in reps.items()})
    sizes_ok = all(len(r.conditional) == 10_000 and len(r.marginal) == 10_000 for r in reps.values())
    ok = sizes_ok and max(ks.values()) < 0.03 and elapsed < 30
    record_criterion(2, "WCP demonstration", ok,
                     " ".join(f"KS[{k}]={v:.4f}" for k, v in ks.items()) + f" time={elapsed:.1f}s")
    assert ok


def test_jacobian_oracle_equivalence(record_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    worst_brute = worst_closed = 0.0
    cases = 0
    for n in range(2, 7):
        dge = make_normal_location_scale(n)
        for _ in range(100):
            x = rng.normal(0, 3, size=n)
            mu, sigma = rng.normal(0, 2), rng.uniform(0.05, 10)
            got = jacobian_full(dge, x, [mu, sigma]).value
            rows = [[1.0, (v - mu) / sigma] for v in x]
            brute = math.fsum(abs(laplace_det([rows[a], rows[b]])) for a, b in itertools.combinations(range(n), 2))
            closed = math.fsum(abs(a - b) for a, b in itertools.combinations(x, 2)) / sigma
            worst_brute = max(worst_brute, abs(got - brute) / brute)
            worst_closed = max(worst_closed, abs(got - closed) / closed)
            cases += 1
    elapsed = time.perf_counter() - t0
    ok = worst_brute < 1e-9 and worst_closed < 1e-9 and elapsed < 10
    record_criterion(3, "Jacobian oracle equivalence", ok,
                     f"{cases} cases, max rel err brute={worst_brute:.1e} closed={worst_closed:.1e} "
                     f"time={elapsed:.2f}s")
    assert ok


def independent_posterior(x, grid):
    # Bayes posterior with prior 1/sigma, coded directly from the normal likelihood
    mu, sig = np.meshgrid(grid.axis_nodes(0), grid.axis_nodes(1), indexing="ij")
    logpost = stats.norm.logpdf(x[:, None, None], mu[None], sig[None]).sum(axis=0) - np.log(sig)
    w = np.exp(logpost - logpost.max())
    return w / (w.sum() * grid.cell_volume)


def test_separability_gives_bayes(record_criterion):
    t0 = time.perf_counter()
    x = np.array([-0.5, -0.2, 0.0, 0.3, 0.6])
    box = ((-4.0, 0.01), (4.0, 4.0))
    grid = ParameterGrid(*box, (400, 400))
    gfd = tabulate_gfd(make_normal_location_scale(5, bounds=box), x, grid)
    post = independent_posterior(x, grid)
    sup = float(np.max(np.abs(gfd.values - post)))
    elapsed = time.perf_counter() - t0
    ok = sup < 1e-4 and elapsed < 60
    record_criterion(4, "Separability implies Bayes", ok,
                     f"sup-norm={sup:.2e} (peak density {post.max():.3f}) time={elapsed:.1f}s")
    assert ok


def test_eps_ladder_convergence(record_criterion):
    t0 = time.perf_counter()
    x = np.array([-0.5, -0.2, 0.0, 0.3, 0.6])
    box = ((-4.0, 0.01), (4.0, 4.0))
    dge = make_normal_location_scale(5, bounds=box)
    fd = tabulate_gfd(dge, x, ParameterGrid(*box, (400, 400)))
    ladder = [0.4, 0.2, 0.1]
    n = 10_000
    sets = sample_gfd_ladder(dge, x, ladder, n, seed=5, budget=10**8)
    ks = [ks_distance(s.draws, fd) for s in sets]
    noise = 1.0 / math.sqrt(n)
    monotone = all(b <= a + 2 * noise for a, b in zip(ks, ks[1:]))
    elapsed = time.perf_counter() - t0
    ok = ks[-1] < 0.05 and monotone and elapsed < 300
    record_criterion(5, "Epsilon-limit convergence", ok,
                     " ".join(f"eps={e}: KS={k:.4f} acc={s.meta.acceptance_rate:.1e}"
                              for e, k, s in zip(ladder, ks, sets)) + f" time={elapsed:.1f}s")
    assert ok


def test_slp_pair_refutation(record_criterion):
    t0 = time.perf_counter()
    rep = check_slp_pair_sequential(sigma=1.0, theta_grid=(0.0, 0.1, 0.2, 0.5, 1.0), reps=100_000, seed=7)
    elapsed = time.perf_counter() - t0
    ok = (rep.c[0] > 0 and rep.isotonic_accepted and rep.constant_rejected and rep.verdict == "not-SLP-pair"
          and elapsed < 300)
    record_criterion(6, "SLP pair refutation", ok,
                     "c=" + ",".join(f"{v:.4f}" for v in rep.c) + f" const max z={rep.constant_max_z:.1f} "
                     f"iso max z={rep.isotonic_max_z:.2f} verdict={rep.verdict} time={elapsed:.1f}s")
    assert ok


def test_fisher_matches_gfd(record_criterion):
    t0 = time.perf_counter()
    x = 0.7
    grid = ParameterGrid((x - 10.0,), (x + 10.0,), (2001,))
    fisher = fisher_fiducial(lambda xx, t: stats.norm.cdf(xx - t), x, grid)
    gfd = tabulate_gfd(make_location(1, bounds=(x - 10.0, x + 10.0)), [x], grid)
    sup = float(np.max(np.abs(fisher.values - gfd.values)))
    elapsed = time.perf_counter() - t0
    ok = sup < 1e-5 and elapsed < 5
    record_criterion(7, "Fisher and GFD agree", ok, f"sup-norm={sup:.2e} time={elapsed:.2f}s")
    assert ok


def test_coverage_properties(record_criterion):
    t0 = time.perf_counter()
    loc = make_location(1, bounds=(-12.0, 12.0))
    cont, _ = run_coverage_levels(loc, [0.0], [0.95], 2000, ParameterGrid((-12.0,), (12.0,), (2401,)), seed=8)
    c = cont[0.95]
    se = math.sqrt(0.95 * 0.05 / c.reps)
    disc, _ = run_coverage_levels(make_geometric(), [0.3], [0.95], 2000, None, seed=9)
    d = disc[0.95]
    elapsed = time.perf_counter() - t0
    ok = (abs(c.coverage - 0.95) <= 2 * se and 0.92 <= d.coverage <= 0.98
          and d.envelope_coverage >= d.coverage and elapsed < 300)
    record_criterion(8, "Coverage properties", ok,
                     f"location {c.coverage:.4f} (|dev|={abs(c.coverage - 0.95):.4f}, 2SE={2 * se:.4f}); "
                     f"geometric half {d.coverage:.4f} envelope {d.envelope_coverage:.4f} time={elapsed:.1f}s")
    assert ok
