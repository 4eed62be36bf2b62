"""Named experiment suites behind the command line."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .. import orderstats, ruin
from ..errors import EvaluationError, ParameterError
from ..gcp_core import GcpParams, TruncatedPmf, gcp_pgf, gcp_pmf, gcp_sample_counts
from ..ngcp import RateFunctionSet, ngcp_increment_pmf, ngcp_pgf, ngcp_sample_counts
from ..subordinators import BernsteinFn, StabilityProfile, inverse_stable_marginal
from ..timechange import (InverseStable, Multistable, Subordinated, TimeChangeSpec, gfcp_pgf,
                          gfcp_pmf, gfcp_sample, gsfcp_pgf, gsfcp_pmf, gsfcp_sample,
                          gsmcp_state_probs, gstfcp_pgf, gstfcp_pmf, gstfcp_sample, ngfcp_pmf,
                          tcgcp_first_passage_law, tcgcp_first_passage_mc,
                          tcgcp_jump_rates, tcgcp_pgf, tcgcp_pmf, tcgcp_rate_sum,
                          tcgcp_rate_table,
                          tcgcp_sample_counts, tcgfcp_sample)
from ..timechange.moments import lrd_estimate, mfa_moments
from .config import ExperimentConfig
from .mc import CHUNK, run_mc
from .stats import chi_square_samples, ks_test

ANALYTIC_TOL = 1e-9


@dataclass
class SuiteResult:
    columns: list[str]
    rows: list[list]
    meta: dict = field(default_factory=dict)
    gof_failed: bool = False
    check_failed: bool = False

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


# ---------------------------------------------------------------------------
# process adapters


@dataclass
class Process:
    name: str
    params: dict
    sample: Callable[[float, int, np.random.Generator], np.ndarray]
    pmf: Callable[[float, int | None], TruncatedPmf] | None = None
    pgf: Callable[[np.ndarray, float], np.ndarray] | None = None


def _need(value, flag: str, process: str):
    if value is None:
        raise ParameterError(f"process {process} needs --{flag}")
    return value


def _single_rate(cfg: ExperimentConfig) -> float:
    rates = cfg.rates()
    if len(rates) != 1:
        raise ParameterError(f"process {cfg.process} takes a single intensity")
    try:
        return float(rates[0])
    except ValueError as exc:
        raise ParameterError(f"cannot parse intensity {rates[0]!r}") from exc


def _gamma_params(cfg: ExperimentConfig) -> tuple[float, float]:
    f = BernsteinFn.parse(cfg.bernstein or "gamma:1,1")
    if f.family != "gamma":
        raise ParameterError("the negative binomial process needs a gamma Bernstein function")
    return f.a, f.b


def build_process(cfg: ExperimentConfig) -> Process:
    name = cfg.process
    if name in ("ngcp", "ngfcp"):
        r = RateFunctionSet.parse(cfg.rates())
        if cfg.k is not None and r.k != cfg.k:
            raise ParameterError(f"--k {cfg.k} does not match {r.k} rate functions")
        if name == "ngcp":
            def sample(t, size, rng):
                return ngcp_sample_counts(r, [t], size, rng)[:, 0] if t > 0 else np.zeros(size, np.int64)
            return Process(name, {"rates": cfg.lam}, sample,
                           lambda t, n: ngcp_increment_pmf(r, t, 0.0, n), lambda u, t: ngcp_pgf(r, t, u))
        beta = _need(cfg.beta, "beta", name)

        def sample(t, size, rng):
            y = np.full(size, float(t)) if beta == 1 else inverse_stable_marginal(beta, t, rng, size)
            means = r.window_many(y, 0.0)
            out = np.zeros(size, dtype=np.int64)
            for j in range(r.k):
                out += (j + 1) * rng.poisson(means[:, j])
            return out
        return Process(name, {"rates": cfg.lam, "beta": beta}, sample, lambda t, n: ngfcp_pmf(r, beta, t, 0.0, n))

    if name == "tfnb":
        a, b = _gamma_params(cfg)
        tp = orderstats.TfnbParams(_single_rate(cfg), a, b, _need(cfg.beta, "beta", name))
        f, gp = tp.as_process()

        def pmf(t, n):
            n = 40 if n is None else n
            probs = orderstats.tfnb_pmf_vector(tp, t, n)
            return TruncatedPmf(probs, max(0.0, 1.0 - math.fsum(probs)), method="series",
                                notes=["tail is the residual mass, not a bound"])
        return Process(name, {"lambda": tp.lam, "a": a, "b": b, "beta": tp.beta},
                       lambda t, size, rng: tcgfcp_sample(f, gp, tp.beta, t, size, rng), pmf,
                       lambda u, t: np.array([orderstats.tfnb_pgf(tp, float(x), t) for x in np.atleast_1d(u)]))

    if name == "stfpp":
        lam = _single_rate(cfg)
        alpha, beta = _need(cfg.alpha, "alpha", name), _need(cfg.beta, "beta", name)
        gp = GcpParams((lam,))

        def pmf(t, n):
            n = 40 if n is None else n
            probs = np.array([orderstats.stfpp_pmf(alpha, beta, lam, m, t) for m in range(n + 1)])
            return TruncatedPmf(probs, max(0.0, 1.0 - math.fsum(probs)), method="mpmath series",
                                notes=["tail is the residual mass, not a bound"])
        return Process(name, {"lambda": lam, "alpha": alpha, "beta": beta},
                       lambda t, size, rng: gstfcp_sample(gp, alpha, beta, t, size, rng), pmf)

    p = GcpParams.parse(cfg.lam)
    common = {"lambda": list(p.lam)}
    if name == "gcp":
        return Process(name, common, lambda t, size, rng: gcp_sample_counts(p, np.full(size, float(t)), size, rng),
                       lambda t, n: gcp_pmf(p, t, n), lambda u, t: gcp_pgf(p, u, t))
    if name == "gfcp":
        beta = _need(cfg.beta, "beta", name)
        return Process(name, {**common, "beta": beta}, lambda t, size, rng: gfcp_sample(p, beta, t, size, rng),
                       lambda t, n: gfcp_pmf(p, beta, t, n), lambda u, t: gfcp_pgf(p, beta, u, t))
    if name == "gsfcp":
        beta = _need(cfg.beta, "beta", name)
        return Process(name, {**common, "beta": beta}, lambda t, size, rng: gsfcp_sample(p, beta, t, size, rng),
                       lambda t, n: gsfcp_pmf(p, beta, t, n), lambda u, t: gsfcp_pgf(p, beta, u, t))
    if name == "gstfcp":
        alpha, beta = _need(cfg.alpha, "alpha", name), _need(cfg.beta, "beta", name)
        return Process(name, {**common, "alpha": alpha, "beta": beta},
                       lambda t, size, rng: gstfcp_sample(p, alpha, beta, t, size, rng),
                       lambda t, n: gstfcp_pmf(p, alpha, beta, t, n), lambda u, t: gstfcp_pgf(p, alpha, beta, u, t))
    if name == "tcgcp":
        f = BernsteinFn.parse(_need(cfg.bernstein, "bernstein", name))
        return Process(name, {**common, "bernstein": f.describe()},
                       lambda t, size, rng: tcgcp_sample_counts(f, p, t, size, rng),
                       lambda t, n: tcgcp_pmf(f, p, t, n), lambda u, t: tcgcp_pgf(f, p, u, t))
    if name == "tcgfcp":
        f = BernsteinFn.parse(_need(cfg.bernstein, "bernstein", name))
        beta = _need(cfg.beta, "beta", name)
        return Process(name, {**common, "bernstein": f.describe(), "beta": beta},
                       lambda t, size, rng: tcgfcp_sample(f, p, beta, t, size, rng))
    if name == "gsmcp":
        prof = StabilityProfile.parse(_need(cfg.beta_profile, "beta-profile", name))
        spec = TimeChangeSpec(p, (Multistable(prof),))

        def pmf(t, n):
            n = 20 if n is None else n
            probs = gsmcp_state_probs(prof, p, t, n)
            return TruncatedPmf(probs, max(0.0, 1.0 - math.fsum(probs)), method="slices",
                                notes=["tail is the residual mass, not a bound"])
        return Process(name, {**common, "beta_profile": prof.label},
                       lambda t, size, rng: spec.sample_counts(t, rng, size), pmf)
    if name == "mfa":
        f = BernsteinFn.parse(_need(cfg.bernstein, "bernstein", name))
        alpha = _need(cfg.alpha, "alpha", name)
        spec = TimeChangeSpec(p, (Subordinated(f), InverseStable(alpha)))
        return Process(name, {**common, "bernstein": f.describe(), "alpha": alpha},
                       lambda t, size, rng: spec.sample_counts(t, rng, size))
    raise ParameterError(f"unknown process {name!r}")


def _times(cfg: ExperimentConfig) -> np.ndarray:
    grid = cfg.float_list("t_grid")
    return grid if grid is not None else np.array([cfg.t])


# ---------------------------------------------------------------------------
# suites


def suite_pmf(cfg: ExperimentConfig) -> SuiteResult:
    proc = build_process(cfg)
    if proc.pmf is None:
        raise ParameterError(f"no analytic pmf for process {cfg.process}; use the simulate suite")
    rows, tails, methods, notes = [], {}, {}, {}
    bad = False
    for t in _times(cfg):
        res = proc.pmf(float(t), cfg.n_max)
        cdf = np.cumsum(res.probs)
        for n, (pn, cn) in enumerate(zip(res.probs, cdf)):
            rows.append([float(t), n, float(pn), float(min(cn, 1.0)), res.tail_bound])
        tails[repr(float(t))] = res.tail_bound
        methods[repr(float(t))] = res.method
        notes[repr(float(t))] = list(res.notes)
        bad |= bool(np.any(res.probs < 0) or np.any(res.probs > 1 + 1e-12) or res.mass > 1 + 1e-12)
    return SuiteResult(["t", "n", "pmf", "cdf", "tail_bound"], rows,
                       {"process": proc.name, "params": proc.params, "tail_bound": tails,
                        "method": methods, "notes": notes}, check_failed=bad)


def suite_pgf(cfg: ExperimentConfig) -> SuiteResult:
    proc = build_process(cfg)
    if proc.pgf is None:
        raise ParameterError(f"no pgf for process {cfg.process}")
    us = cfg.float_list("u")
    if us is None:
        us = np.linspace(-1, 1, 11)
    if np.any(np.abs(us) > 1):
        raise ParameterError("pgf arguments must satisfy |u| <= 1")
    rows = []
    for t in _times(cfg):
        vals = np.atleast_1d(proc.pgf(us, float(t)))
        rows += [[float(t), float(u), float(v)] for u, v in zip(us, vals)]
    return SuiteResult(["t", "u", "pgf"], rows, {"process": proc.name, "params": proc.params})


def suite_simulate(cfg: ExperimentConfig) -> SuiteResult:
    proc = build_process(cfg)
    rows, gof = [], {}
    failed = False
    for t in _times(cfg):
        t = float(t)
        run = run_mc(lambda rng, size: proc.sample(t, size, rng), cfg.sims, cfg.seed, cfg.workers)
        draws = np.asarray(run.draws, dtype=np.int64)
        top = int(draws.max()) if cfg.n_max is None else cfg.n_max
        hist = np.bincount(np.minimum(draws, top + 1), minlength=top + 2)
        expected = None
        if proc.pmf is not None:
            try:
                expected = proc.pmf(t, top)
                rep = chi_square_samples(expected, draws)
                gof[repr(t)] = rep.summary()
                failed |= not rep.passed
            except (EvaluationError, ParameterError) as exc:
                gof[repr(t)] = {"skipped": str(exc)}
                expected = None
        for n in range(top + 1):
            e = float(expected.probs[n]) if expected is not None and n < len(expected.probs) else math.nan
            rows.append([t, n, int(hist[n]), hist[n] / cfg.sims, e])
        mom = run.moments()
        gof.setdefault("moments", {})[repr(t)] = {"mean": mom.mean, "var": mom.variance, "stderr": mom.stderr}
    return SuiteResult(["t", "n", "count", "freq", "pmf"], rows,
                       {"process": proc.name, "params": proc.params, "gof": gof, "sims": cfg.sims,
                        "seed": cfg.seed, "chunks": math.ceil(cfg.sims / CHUNK)}, gof_failed=failed)


def suite_firstpassage(cfg: ExperimentConfig) -> SuiteResult:
    """First passage of level n for M(D_f(t)): analytic CDF against simulated passage times."""
    if cfg.process != "tcgcp":
        raise ParameterError("first passage laws are available for the tcgcp process")
    p = GcpParams.parse(cfg.lam)
    f = BernsteinFn.parse(cfg.bernstein or "gamma:1,1")
    n = cfg.level
    law = tcgcp_first_passage_law(f, p, n)
    run = run_mc(lambda rng, size: tcgcp_first_passage_mc(f, p, n, size, rng), cfg.sims, cfg.seed, cfg.workers)
    rep = ks_test(run.draws, law.cdf)
    grid = cfg.float_list("t_grid")
    if grid is None:
        grid = np.quantile(run.draws, np.linspace(0.05, 0.95, 19))
    sorted_draws = np.sort(run.draws)
    emp = np.searchsorted(sorted_draws, grid, side="right") / sorted_draws.size
    dens = np.atleast_1d(law.density(grid))
    cdf = np.atleast_1d(law.cdf(grid))
    rows = [[float(s), float(d), float(c), float(e)] for s, d, c, e in zip(grid, dens, cdf, emp)]
    meta = {"process": "tcgcp", "level": n, "bernstein": f.describe(), "lambda": list(p.lam),
            "ks": rep.summary(), "mass": law.total_mass}
    if n == 1:
        meta["exponential_rate"] = float(f(p.total))
    return SuiteResult(["s", "density", "cdf", "ecdf"], rows, meta, gof_failed=not rep.passed)


def suite_ruin(cfg: ExperimentConfig) -> SuiteResult:
    """K(u, y): analytic at u = 0 (and the psi column), Monte Carlo on the whole grid."""
    p = GcpParams.parse(cfg.lam)
    f = BernsteinFn.parse(cfg.bernstein or "gamma:1,1")
    claims = ruin.ClaimDist.parse(cfg.claims)
    c = _need(cfg.c, "c", "ruin")
    model = ruin.RiskModel(c, claims, f, p)
    us = cfg.float_list("u_grid")
    us = np.array([0.0]) if us is None else us
    ys = cfg.float_list("y_grid")
    ys = np.array([0.5, 1.0, 2.0, math.inf]) if ys is None else ys
    run = run_mc(lambda rng, size: _ladder_rows(model, size, rng, cfg.horizon, us, ys),
                 cfg.sims, cfg.seed, cfg.workers)
    # rows of indicators: one column per (u, y) pair
    rows = []
    psi0 = ruin.psi0(model)
    for i, u in enumerate(us):
        for j, y in enumerate(ys):
            hits = run.draws[:, i * ys.size + j]
            k_mc = float(hits.mean())
            se = math.sqrt(max(k_mc * (1 - k_mc), 0.0) / hits.size)
            if u == 0:
                k_an = psi0 if math.isinf(y) else ruin.k0y(model, float(y))
            else:
                k_an = math.nan
            rows.append([float(u), float(y), k_an, k_mc, k_mc - 1.96 * se, k_mc + 1.96 * se])
    meta = {"c": c, "claims": cfg.claims, "bernstein": f.describe(), "lambda": list(p.lam),
            "safety_loading": ruin.safety_loading(model), "psi0": psi0, "horizon": cfg.horizon,
            "sims": cfg.sims, "seed": cfg.seed}
    return SuiteResult(["u", "y", "K_analytic", "K_mc", "ci_low", "ci_high"], rows, meta)


def _ladder_rows(model, size, rng, horizon, us, ys) -> np.ndarray:
    lad = ruin.simulate_ladders(model, size, rng, horizon=horizon)
    cols = []
    for u in us:
        ruined, deficit = lad.first_exceedance(float(u))
        deficit = np.nan_to_num(deficit, nan=np.inf)
        cols += [ruined & (deficit <= y) for y in ys]
    return np.stack(cols, axis=1).astype(np.float64)


def suite_orderstat(cfg: ExperimentConfig) -> SuiteResult:
    rows = []
    t_vals = _times(cfg)
    if cfg.process == "tfnb":
        a, b = _gamma_params(cfg)
        tp = orderstats.TfnbParams(_single_rate(cfg), a, b, _need(cfg.beta, "beta", "tfnb"))
        for t in t_vals:
            lhs, rhs = orderstats.kth_order_tfnb(tp, cfg.k_stat, cfg.f_at_z, float(t))
            rows.append([float(t), cfg.k_stat, cfg.f_at_z, lhs, rhs, abs(lhs - rhs)])
        params = {"lambda": tp.lam, "a": a, "b": b, "beta": tp.beta}
    elif cfg.process == "stfpp":
        lam = _single_rate(cfg)
        alpha, beta = _need(cfg.alpha, "alpha", "stfpp"), _need(cfg.beta, "beta", "stfpp")
        for t in t_vals:
            lhs, rhs = orderstats.kth_order_stfpp(alpha, beta, lam, cfg.k_stat, cfg.f_at_z, float(t))
            rows.append([float(t), cfg.k_stat, cfg.f_at_z, lhs, rhs, abs(lhs - rhs)])
        params = {"lambda": lam, "alpha": alpha, "beta": beta}
    else:
        raise ParameterError("order statistics are available for the tfnb and stfpp processes")
    bad = any(r[-1] > 1e-7 for r in rows)
    return SuiteResult(["t", "k_stat", "F", "lhs", "rhs", "abs_diff"], rows,
                       {"process": cfg.process, "params": params, "tolerance": 1e-7}, check_failed=bad)


def suite_lrd(cfg: ExperimentConfig) -> SuiteResult:
    p = GcpParams.parse(cfg.lam)
    f = BernsteinFn.parse(cfg.bernstein or "gamma:1,1")
    alpha = _need(cfg.alpha, "alpha", "lrd")
    grid = cfg.float_list("t_grid")
    grid = np.geomspace(10, 1000, 9) if grid is None else grid
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    est = lrd_estimate(f, p, alpha, cfg.s, grid, n_paths=cfg.sims if cfg.sims > 1 else 0, rng=rng)
    mom = mfa_moments(f, p, alpha, cfg.s, grid)
    mc = est.mc_corr if est.mc_corr is not None else np.full(grid.size, math.nan)
    rows = [[float(t), float(m), float(v), float(ca), float(cm)]
            for t, m, v, ca, cm in zip(grid, mom.mean, mom.var, est.analytic_corr, mc)]
    meta = {"alpha": alpha, "s": cfg.s, "analytic_slope": est.analytic_slope, "mc_slope": est.mc_slope,
            "fit_window": list(est.fit_window), "n_paths": est.n_paths, "seed": cfg.seed,
            "overdispersed": bool(np.all(mom.var > mom.mean))}
    return SuiteResult(["t", "mean", "var", "corr_analytic", "corr_mc"], rows, meta,
                       check_failed=not meta["overdispersed"])


# ---------------------------------------------------------------------------
# verify


@dataclass
class Check:
    name: str
    kind: str            # "analytic" or "gof"
    value: float         # discrepancy, or p-value for gof checks
    tolerance: float     # max discrepancy, or significance

    @property
    def passed(self) -> bool:
        if self.kind == "gof":
            return self.value >= self.tolerance
        return self.value <= self.tolerance


def _maxdiff(a: TruncatedPmf | np.ndarray, b: TruncatedPmf | np.ndarray) -> float:
    a = a.probs if isinstance(a, TruncatedPmf) else np.asarray(a)
    b = b.probs if isinstance(b, TruncatedPmf) else np.asarray(b)
    m = min(a.size, b.size)
    return float(np.max(np.abs(a[:m] - b[:m])))


def reduction_lattice(sims: int = 100_000, seed: int = 20240601, workers: int = 1) -> list[Check]:
    """Special cases that must collapse onto simpler processes."""
    p2 = GcpParams((1.0, 1.0))
    p1 = GcpParams((0.5,))
    t, N = 1.0, 25
    out: list[Check] = []
    base = gcp_pmf(p2, t, N)
    out.append(Check("k=1 gcp = poisson", "analytic",
                     _maxdiff(gcp_pmf(p1, t, N), stats.poisson.pmf(np.arange(N + 1), 0.5 * t)), ANALYTIC_TOL))
    out.append(Check("gfcp beta=1 = gcp", "analytic", _maxdiff(gfcp_pmf(p2, 1.0, t, N), base), ANALYTIC_TOL))
    for beta in (0.5, 0.7):
        tfpp = [orderstats.stfpp_pmf(beta, 1.0, 0.5, n, t) for n in range(N + 1)]
        out.append(Check(f"k=1 gfcp beta={beta} = tfpp", "analytic",
                         _maxdiff(gfcp_pmf(p1, beta, t, N), tfpp), ANALYTIC_TOL))
        out.append(Check(f"gstfcp alpha=1 beta={beta} = gsfcp", "analytic",
                         _maxdiff(gstfcp_pmf(p2, 1.0, beta, t, N), gsfcp_pmf(p2, beta, t, N)), ANALYTIC_TOL))
        out.append(Check(f"gstfcp beta=1 alpha={beta} = gfcp", "analytic",
                         _maxdiff(gstfcp_pmf(p2, beta, 1.0, t, N), gfcp_pmf(p2, beta, t, N)), ANALYTIC_TOL))
        out.append(Check(f"tcgcp stable({beta}) = gsfcp", "analytic",
                         _maxdiff(tcgcp_pmf(BernsteinFn.stable(beta), p2, t, N), gsfcp_pmf(p2, beta, t, N)),
                         ANALYTIC_TOL))
        out.append(Check(f"gsmcp constant({beta}) = gsfcp", "analytic",
                         _maxdiff(gsmcp_state_probs(StabilityProfile.constant(beta), p2, t, N),
                                  gsfcp_pmf(p2, beta, t, N)), ANALYTIC_TOL))
        out.append(Check(f"ngfcp constant rates beta={beta} = gfcp", "analytic",
                         _maxdiff(ngfcp_pmf(RateFunctionSet.constant((1.0, 1.0)), beta, t, 0.0, N),
                                  gfcp_pmf(p2, beta, t, N)), ANALYTIC_TOL))
    for alpha, beta in ((0.6, 0.5), (0.9, 0.7)):
        stfpp = [orderstats.stfpp_pmf(alpha, beta, 0.5, n, t) for n in range(N + 1)]
        out.append(Check(f"k=1 gstfcp ({alpha},{beta}) = stfpp", "analytic",
                         _maxdiff(gstfcp_pmf(p1, alpha, beta, t, N), stfpp), ANALYTIC_TOL))
    out.append(Check("ngcp constant rates = gcp", "analytic",
                     _maxdiff(ngcp_increment_pmf(RateFunctionSet.constant((1.0, 1.0)), t, 0.0, N), base),
                     ANALYTIC_TOL))
    tp = orderstats.TfnbParams(0.5, 1.0, 1.0, 1.0)
    nb = stats.nbinom.pmf(np.arange(N + 1), tp.b * t, tp.a / (tp.a + tp.lam))
    out.append(Check("tfnb beta=1 = negative binomial", "analytic",
                     _maxdiff(orderstats.tfnb_pmf_vector(tp, t, N), nb), ANALYTIC_TOL))

    # sampled side: draws of the general process at the special parameter
    # against the simpler process's pmf
    draws = [
        ("gfcp beta=1 draws ~ gcp", lambda rng, s: gfcp_sample(p2, 1.0, t, s, rng), base),
        ("gstfcp alpha=1 draws ~ gsfcp", lambda rng, s: gstfcp_sample(p2, 1.0, 0.7, t, s, rng), gsfcp_pmf(p2, 0.7, t, N)),
        ("gstfcp beta=1 draws ~ gfcp", lambda rng, s: gstfcp_sample(p2, 0.7, 1.0, t, s, rng), gfcp_pmf(p2, 0.7, t, N)),
        ("k=1 gfcp draws ~ tfpp", lambda rng, s: gfcp_sample(p1, 0.7, t, s, rng),
         np.array([orderstats.stfpp_pmf(0.7, 1.0, 0.5, n, t) for n in range(N + 1)])),
        ("ngcp constant draws ~ gcp",
         lambda rng, s: ngcp_sample_counts(RateFunctionSet.constant((1.0, 1.0)), [t], s, rng)[:, 0], base),
        ("tcgcp stable draws ~ gsfcp",
         lambda rng, s: tcgcp_sample_counts(BernsteinFn.stable(0.7), p2, t, s, rng), gsfcp_pmf(p2, 0.7, t, N)),
    ]
    for i, (name, task, law) in enumerate(draws):
        run = run_mc(task, sims, seed + i, workers)
        rep = chi_square_samples(law, np.asarray(run.draws, dtype=np.int64))
        out.append(Check(name, "gof", rep.p_value, rep.significance))
    return out


def normalization() -> list[Check]:
    """Sum of each analytic pmf plus its certified tail brackets one."""
    p2 = GcpParams((1.0, 1.0))
    p3 = GcpParams((0.5, 1.0, 1.5))
    gam = BernsteinFn.gamma(1.0, 1.0)
    t = 1.0
    laws: list[tuple[str, TruncatedPmf]] = []
    for p, tag in ((p2, "k=2"), (p3, "k=3")):
        laws.append((f"gcp {tag}", gcp_pmf(p, t)))
        laws.append((f"tcgcp gamma {tag}", tcgcp_pmf(gam, p, t)))
        for beta in (0.5, 0.7):
            laws.append((f"gfcp {tag} beta={beta}", gfcp_pmf(p, beta, t)))
            laws.append((f"gsfcp {tag} beta={beta}", gsfcp_pmf(p, beta, t)))
            for alpha in (0.6, 0.9):
                laws.append((f"gstfcp {tag} alpha={alpha} beta={beta}", gstfcp_pmf(p, alpha, beta, t)))
    r = RateFunctionSet.parse(["linear:1,0.5", "constant:1"])
    laws.append(("ngcp linear", ngcp_increment_pmf(r, t)))
    for beta in (0.5, 0.7):
        laws.append((f"ngfcp linear beta={beta}", ngfcp_pmf(r, beta, t)))
    out = []
    for name, law in laws:
        mass = law.mass
        # mass must not exceed one, and the missing mass must be covered by the tail bound
        gap = max(mass - 1.0, 1.0 - mass - law.tail_bound, 0.0)
        out.append(Check(name, "analytic", gap, 1e-9))
    for beta in (0.5, 0.7):
        tp = orderstats.TfnbParams(0.5, 1.0, 1.0, beta)
        mass = math.fsum(orderstats.tfnb_pmf_vector(tp, t, 60))
        out.append(Check(f"tfnb beta={beta}", "analytic", abs(1.0 - mass), 1e-8))
    return out


def telescoping() -> list[Check]:
    """Batch jump rates of M(D_f(t)): rates are nonnegative and partial sum plus remainder is f(total rate)."""
    out = []
    for f in (BernsteinFn.gamma(1.0, 1.0), BernsteinFn.stable(0.5), BernsteinFn.stable(0.7)):
        for lam in ((1.0, 1.0), (0.5, 1.0, 1.5)):
            p = GcpParams(lam)
            s, rem, n = tcgcp_rate_sum(f, p, cap=256)
            tag = f"{f.describe()} k={p.k}"
            out.append(Check(f"rate sum {tag}", "analytic", abs(s + rem - float(f(p.total))), 1e-9))
            table = tcgcp_rate_table(f, p, n)
            out.append(Check(f"rates nonnegative {tag}", "analytic", max(0.0, -float(table.min())), 1e-12))
            literal = np.array([tcgcp_jump_rates(f, p, m) for m in range(1, 9)])
            out.append(Check(f"derivative form = table {tag}", "analytic",
                             float(np.max(np.abs(literal - table[1:9]))), 1e-9))
    return out


VERIFY_TARGETS = {
    "reduction-lattice": reduction_lattice,
    "normalization": normalization,
    "telescoping": telescoping,
}


def suite_verify(cfg: ExperimentConfig) -> SuiteResult:
    target = cfg.target or "reduction-lattice"
    if target not in VERIFY_TARGETS:
        raise ParameterError(f"unknown verify target {target!r}; choose from {', '.join(VERIFY_TARGETS)}")
    fn = VERIFY_TARGETS[target]
    checks = fn(sims=cfg.sims, seed=cfg.seed, workers=cfg.workers) if target == "reduction-lattice" else fn()
    rows = [[c.name, c.kind, c.value, c.tolerance, c.passed] for c in checks]
    analytic_bad = any(not c.passed for c in checks if c.kind == "analytic")
    gof_bad = any(not c.passed for c in checks if c.kind == "gof")
    return SuiteResult(["check", "kind", "value", "tolerance", "pass"], rows,
                       {"target": target, "n_checks": len(checks)},
                       gof_failed=gof_bad, check_failed=analytic_bad)


SUITES = {
    "pmf": suite_pmf, "pgf": suite_pgf, "simulate": suite_simulate, "verify": suite_verify,
    "ruin": suite_ruin, "orderstat": suite_orderstat, "lrd": suite_lrd, "firstpassage": suite_firstpassage,
}


def run_suite(cfg: ExperimentConfig) -> SuiteResult:
    return SUITES[cfg.suite](cfg)
