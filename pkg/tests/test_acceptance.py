"""Acceptance gate: twelve criteria, each reporting one PASS/FAIL line on the terminal.

Seeds are pinned so the sampled gates are reproducible.
"""

import math

import numpy as np
import pytest
from scipy import stats

from gcpkit import orderstats, ruin
from gcpkit.gcp_core import GcpParams
from gcpkit.harness import cli
from gcpkit.harness.mc import run_mc
from gcpkit.harness.stats import chi_square_samples, ks_test
from gcpkit.harness.suites import normalization, reduction_lattice, telescoping
from gcpkit.ngcp import RateFunctionSet
from gcpkit.subordinators import BernsteinFn, StabilityProfile
from gcpkit.timechange import (gfcp_governing_check, gfcp_pmf, gsfcp_min_uniform_mc, gsfcp_pgf, gsfcp_pmf,
                               gsmcp_first_passage, gsmcp_first_passage_mc, gstfcp_sample,
                               ngfcp_governing_residual, tcgcp_first_passage_law, tcgcp_first_passage_mc,
                               tcgcp_pmf, tcgcp_rate_sum, tcgcp_rate_table, tcgcp_sample_counts,
                               tcgfcp_sample)
from gcpkit.timechange.moments import lrd_estimate, mfa_moments

P2 = GcpParams((1.0, 1.0))
P3 = GcpParams((0.5, 1.0, 1.5))
GAMMA = BernsteinFn.gamma(1.0, 1.0)


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip())
        assert ok, f"criterion {number} failed: {detail}"
    return emit


def test_01_normalization(report):
    checks = normalization()
    worst = max(c.value for c in checks)
    bad = [c.name for c in checks if not c.passed]
    report(1, "normalization", not bad, f"{len(checks)} laws, worst gap {worst:.2e} {bad or ''}")


def test_02_reduction_lattice(report):
    checks = reduction_lattice(sims=100_000, seed=20240601)
    analytic = [c for c in checks if c.kind == "analytic"]
    gof = [c for c in checks if c.kind == "gof"]
    bad = [c.name for c in checks if not c.passed]
    report(2, "reduction lattice", not bad and len(gof) >= 5,
           f"{len(analytic)} analytic (max {max(c.value for c in analytic):.1e}), "
           f"{len(gof)} chi-square (min p {min(c.value for c in gof):.3g}) {bad or ''}")


def test_03_gfcp_dual_route(report):
    worst = 0.0
    for p in (P2, P3):
        for beta in (0.5, 0.7):
            for t in (0.5, 1.0, 2.0):
                a = gfcp_pmf(p, beta, t, n_max=10, method="ml").probs
                b = gfcp_pmf(p, beta, t, n_max=10, method="quadrature").probs
                worst = max(worst, float(np.max(np.abs(a - b))))
    report(3, "gfcp Mittag-Leffler route vs quadrature", worst <= 1e-6, f"max diff {worst:.2e}")


def test_04_telescoping(report):
    checks = telescoping()
    sums = [c.value for c in checks if c.name.startswith("rate sum")]
    lowest = math.inf
    for f in (GAMMA, BernsteinFn.stable(0.5), BernsteinFn.stable(0.7)):
        for p in (P2, P3):
            _, _, n = tcgcp_rate_sum(f, p, cap=256)
            lowest = min(lowest, float(tcgcp_rate_table(f, p, n)[1:].min()))
    ok = all(c.passed for c in checks) and max(sums) <= 1e-9 and lowest >= -1e-12
    report(4, "jump-rate telescoping", ok, f"max |sum - f(total)| {max(sums):.1e}, min rate {lowest:.1e}")


def test_05_first_passage(report):
    rate = float(GAMMA(P2.total))
    first = run_mc(lambda rng, s: tcgcp_first_passage_mc(GAMMA, P2, 1, s, rng), 100_000, 505)
    ks1 = ks_test(first.draws, lambda x: 1 - np.exp(-rate * x))
    law = tcgcp_first_passage_law(GAMMA, P2, 2)
    second = run_mc(lambda rng, s: tcgcp_first_passage_mc(GAMMA, P2, 2, s, rng), 100_000, 506)
    ks2 = ks_test(second.draws, law.cdf)
    report(5, "first passage", ks1.passed and ks2.passed,
           f"level 1 KS p {ks1.p_value:.3g}, level 2 KS p {ks2.p_value:.3g}")


def test_06_gsfcp_identities(report):
    worst = 0.0
    for p in (P2, P3):
        for beta in (0.5, 0.7):
            pm = gsfcp_pmf(p, beta, 1.0, method="psi")
            for u in (-0.9, -0.3, 0.0, 0.4, 0.8):
                gap = abs(np.polynomial.polynomial.polyval(u, pm.probs) - gsfcp_pgf(p, beta, u, 1.0))
                worst = max(worst, gap - pm.tail_bound)
    est, se = gsfcp_min_uniform_mc(P2, 0.5, 0.4, 1.0, 1_000_000, np.random.default_rng(606))
    z = (est - gsfcp_pgf(P2, 0.5, 0.4, 1.0)) / se
    report(6, "gsfcp pgf and min-uniform identity", worst <= 1e-7 and abs(z) < 4,
           f"pgf gap beyond tail {max(worst, 0):.1e}, min-uniform z {z:+.2f}")


def test_07_gsmcp(report):
    prof = StabilityProfile.linear(0.4, 0.3)
    rng = np.random.default_rng(707)
    zs, biases = [], []
    ok = True
    for m in (2, 3):
        res = gsmcp_first_passage_mc(prof, P2, m, 1.0, 100_000, rng, dt=0.01)
        gap = abs(res["estimate"] - res["analytic"])
        ok &= gap < 4 * res["se"] + res["slice_bias"] and res["slice_bias"] < 0.01
        zs.append((res["estimate"] - res["slice_analytic"]) / res["se"])
        biases.append(res["slice_bias"])
    worst = 0.0
    for beta in (0.5, 0.7):
        pm = gsfcp_pmf(P3, beta, 1.2, n_max=8)
        for m in (1, 4, 9):
            worst = max(worst, abs(gsmcp_first_passage(StabilityProfile.constant(beta), P3, m, 1.2)
                                   - math.fsum(pm.probs[:m])))
    report(7, "gsmcp first upcrossing", ok and worst <= 1e-8,
           f"z vs slices {[round(z, 2) for z in zs]}, slice bias {max(biases):.1e}, constant-index gap {worst:.1e}")


def test_08_governing_equations(report):
    t = np.arange(0, 1001) * 1e-3
    caputo = max(gfcp_governing_check(P2, beta, t, n_max=8).max_residual for beta in (0.5, 0.7))
    r = RateFunctionSet.parse(["linear:1", "linear:0.5,1"])
    ngfcp = ngfcp_governing_residual(r, 0.7, t, n_max=8).max_residual
    draws = run_mc(lambda rng, s: tcgcp_sample_counts(GAMMA, P2, 1.0, s, rng), 100_000, 808).draws
    rep = chi_square_samples(tcgcp_pmf(GAMMA, P2, 1.0, method="ode"), np.asarray(draws, dtype=np.int64))
    report(8, "governing-equation residuals", caputo < 5e-3 and ngfcp < 5e-3 and rep.passed,
           f"caputo {caputo:.1e}, ngfcp {ngfcp:.1e}, ode chi-square p {rep.p_value:.3g}")


def test_09_ruin(report):
    model = ruin.RiskModel(4.0, ruin.ClaimDist.exponential(1.0), GAMMA, P2)
    lad = ruin.simulate_ladders(model, 1_000_000, np.random.default_rng(909))
    ys = np.array([0.25, 0.5, 1.0, 2.0, 4.0, 8.0])
    est, se = ruin.k_mc(lad, 0.0, ys)
    z = (est - ruin.k0y(model, ys)) / se
    p_est, p_se = ruin.k_mc(lad, 0.0, [np.inf])
    exact = 1 / (1 + ruin.safety_loading(model))
    limit_gap = abs(ruin.k0y(model, 400.0) - ruin.psi0(model))
    ok = np.all(np.abs(z) < 3) and abs(p_est[0] - ruin.psi0(model)) < 3 * p_se[0] \
        and abs(ruin.psi0(model) - exact) < 1e-6 and limit_gap < 1e-6
    report(9, "ruin deficit law", bool(ok),
           f"max |z| {np.max(np.abs(z)):.2f}, psi0 {ruin.psi0(model):.6f} vs MC {p_est[0]:.6f}, "
           f"K(0,400) gap {limit_gap:.1e}")


def test_10_order_statistics(report):
    tp = orderstats.TfnbParams(0.5, 1.0, 1.0, 0.6)
    worst_nb = worst_st = 0.0
    for k in (1, 2, 3):
        for F in (0.1, 0.5, 0.9):
            for t in (0.5, 1.0, 2.0):
                lhs, rhs = orderstats.kth_order_tfnb(tp, k, F, t)
                worst_nb = max(worst_nb, abs(lhs - rhs))
                lhs, rhs = orderstats.kth_order_stfpp(0.9, 0.7, 0.5, k, F, t)
                worst_st = max(worst_st, abs(lhs - rhs))
    rng = np.random.default_rng(1010)
    f, p = tp.as_process()
    est, se = orderstats.kth_order_mc(tcgfcp_sample(f, p, tp.beta, 1.0, 200_000, rng), 2, 0.5, rng)
    z1 = (est - orderstats.kth_order_tfnb(tp, 2, 0.5, 1.0)[1]) / se
    est, se = orderstats.kth_order_mc(gstfcp_sample(GcpParams((0.5,)), 0.9, 0.7, 1.0, 200_000, rng), 2, 0.5, rng)
    z2 = (est - orderstats.kth_order_stfpp(0.9, 0.7, 0.5, 2, 0.5, 1.0)[1]) / se
    ok = worst_nb <= 1e-7 and worst_st <= 1e-7 and abs(z1) < 4 and abs(z2) < 4
    report(10, "order statistics", ok,
           f"27-point max gap tfnb {worst_nb:.1e} stfpp {worst_st:.1e}, MC z {z1:+.2f} {z2:+.2f}")


def test_11_moments_and_lrd(report):
    alpha = 0.7
    t = np.linspace(0.5, 1000, 60)
    mom = mfa_moments(GAMMA, P2, alpha, 0.5, t)
    over = bool(np.all(mom.var > mom.mean))
    grid = np.logspace(1, 3, 7)
    est = lrd_estimate(GAMMA, P2, alpha, 1.0, grid, n_paths=100_000, rng=np.random.default_rng(1111))
    ok = over and abs(est.analytic_slope + alpha) <= 0.05 and abs(est.mc_slope + alpha) <= 0.1
    report(11, "overdispersion and long-range dependence", ok,
           f"alpha {alpha}: analytic slope {est.analytic_slope:.3f}, MC slope {est.mc_slope:.3f} "
           f"over {est.fit_window}")


def test_12_determinism(report, tmp_path, capsys, monkeypatch):
    for key in list(__import__("os").environ):
        if key.startswith("GCPKIT_"):
            monkeypatch.delenv(key)
    outputs = []
    for i, workers in enumerate((1, 1, 4)):
        out = tmp_path / f"run{i}.csv"
        code = cli.main(["simulate", "--process", "tcgcp", "--bernstein", "gamma:1,1", "--lambda", "1,1",
                         "--sims", "100000", "--seed", "1212", "--workers", str(workers), "--out", str(out)])
        assert code == 0
        outputs.append(out.read_bytes())
    a = run_mc(lambda rng, s: tcgcp_sample_counts(GAMMA, P3, 1.5, s, rng), 100_000, 1213, workers=1)
    b = run_mc(lambda rng, s: tcgcp_sample_counts(GAMMA, P3, 1.5, s, rng), 100_000, 1213, workers=4)
    same_bytes = outputs[0] == outputs[1] == outputs[2]
    same_summary = a.draws.tobytes() == b.draws.tobytes() and a.moments() == b.moments()
    report(12, "determinism", same_bytes and same_summary,
           f"output files identical: {same_bytes}, serial/parallel summaries identical: {same_summary}")
