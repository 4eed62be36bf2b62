"""Time-fractional GCP M(Y_beta(t)) and its non-homogeneous variant.

Three routes for the GFCP pmf:

* ``ml``: the count of Poisson epochs by time Y_beta(t) has law
  pi_z = (Lambda t^beta)^z / z! * E^{(z)}_{beta,1}(-Lambda t^beta), built from
  Mittag-Leffler derivatives;
* ``quadrature``: GCP pmf integrated against the inverse stable density;
* ``mc``: empirical law of M(Y_beta(t)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..combin import convolution_powers
from ..errors import ParameterError
from ..gcp_core import (GcpParams, TruncatedPmf, certified, choose_n_max, compound_tails,
                        gcp_pmf, gcp_sample_counts)
from ..ngcp import RateFunctionSet, ngcp_increment_pmf
from ..specfun import caputo_numeric, mittag_leffler, ml_derivative
from ..subordinators import inverse_stable_marginal
from .core import (chernoff_tail_many, gcp_tails_grid, mc_pmf, point_mass, poisson_law, rule_for,
                   window_pmf_many)

ML_ORDER_LIMIT = 30
TAIL_TARGET = 1e-10


def _check(beta: float, t: float) -> None:
    if not 0 < beta <= 1:
        raise ParameterError(f"fractional order must lie in (0,1], got {beta}")
    if t < 0:
        raise ParameterError("t must be nonnegative")


def gfcp_tails(p: GcpParams, beta: float, t: float, n_max: int,
               q: np.ndarray | None = None) -> np.ndarray:
    """Pr(M(Y_beta(t)) > m) for m = 0..n_max, mixing exact GCP tails over the clock."""
    if q is None:
        q = convolution_powers(p.jump_probs, n_max)
    if beta == 1:
        return compound_tails(p.jump_probs, p.total * t, n_max, q)
    rule = rule_for(beta)
    tails = gcp_tails_grid(p, t**beta * rule.nodes, n_max, q)
    return np.clip(rule.weights @ tails, 0.0, 1.0)


def gfcp_choose_n_max(p: GcpParams, beta: float, t: float, target: float = TAIL_TARGET) -> int:
    if beta == 1:
        return choose_n_max(p.jump_probs, p.total * t, target)
    mean_clock = t**beta / math.gamma(1 + beta)
    n = choose_n_max(p.jump_probs, p.total * mean_clock * 3.0 + 1.0, target)
    while True:
        ok = np.nonzero(gfcp_tails(p, beta, t, n) < target)[0]
        if ok.size:
            return int(ok[0])
        if n > 5000:
            raise ParameterError("truncation level exceeds desk scale")
        n *= 2


def epoch_law_ml(total: float, beta: float, t: float, z_max: int) -> np.ndarray:
    """Pr(N(Y_beta(t)) = z) for a rate-`total` Poisson process N, via ML derivatives."""
    c = total * t**beta
    out = np.empty(z_max + 1)
    out[0] = mittag_leffler(beta, 1.0, -c)
    for z in range(1, z_max + 1):
        out[z] = math.exp(z * math.log(c) - math.lgamma(z + 1)) * ml_derivative(beta, 1.0, -c, z)
    return out


def epoch_law_quadrature(total: float, beta: float, t: float, z_max: int) -> np.ndarray:
    rule = rule_for(beta)
    return rule.weights @ poisson_law(total * t**beta * rule.nodes, z_max)


def gfcp_pmf(p: GcpParams, beta: float, t: float, n_max: int | None = None, method: str = "ml",
             rng: np.random.Generator | None = None, sims: int = 100_000) -> TruncatedPmf:
    """State probabilities of the fractional GCP at time t."""
    _check(beta, t)
    if method not in ("ml", "quadrature", "mc"):
        raise ParameterError(f"unknown method {method!r}")
    if n_max is None:
        n_max = 0 if t == 0 else gfcp_choose_n_max(p, beta, t)
    if t == 0:
        return point_mass(n_max, method)
    if method == "mc":
        rng = rng if rng is not None else np.random.default_rng()
        return mc_pmf(gfcp_sample(p, beta, t, sims, rng), n_max)
    if beta == 1:
        res = gcp_pmf(p, t, n_max)
        res.method = method
        res.notes.append("order one: plain GCP law")
        return res
    q = convolution_powers(p.jump_probs, n_max)
    notes = []
    if method == "ml":
        z_ml = min(n_max, ML_ORDER_LIMIT)
        law = epoch_law_ml(p.total, beta, t, z_ml)
        probs = law @ q[: z_ml + 1, : n_max + 1]
        if n_max > ML_ORDER_LIMIT:
            quad = epoch_law_quadrature(p.total, beta, t, n_max) @ q
            probs[ML_ORDER_LIMIT + 1:] = quad[ML_ORDER_LIMIT + 1:]
            notes.append(f"states above {ML_ORDER_LIMIT} need derivative orders beyond the limit; "
                         "those states use quadrature")
    else:
        probs = epoch_law_quadrature(p.total, beta, t, n_max) @ q
    tail = gfcp_tails(p, beta, t, n_max, q)[-1]
    res = TruncatedPmf(np.clip(probs, 0.0, None), certified(tail), method=method)
    res.notes.extend(notes)
    return res


def gfcp_pgf(p: GcpParams, beta: float, u, t: float):
    """E u^{M(Y_beta(t))} = E_{beta,1}(t^beta * sum_j lam_j (u^j - 1))."""
    _check(beta, t)
    u_arr = np.asarray(u, dtype=float)
    if np.any(np.abs(u_arr) > 1):
        raise ParameterError("pgf argument must satisfy |u| <= 1")
    return mittag_leffler(beta, 1.0, p.jump_symbol(u_arr) * t**beta)


def gfcp_sample(p: GcpParams, beta: float, t: float, size: int, rng: np.random.Generator) -> np.ndarray:
    clock = np.full(size, float(t)) if beta == 1 else inverse_stable_marginal(beta, t, rng, size)
    return gcp_sample_counts(p, clock, size, rng)


def _epoch_law_many(total: float, beta: float, ts: np.ndarray, z_max: int) -> np.ndarray:
    rule = rule_for(beta)
    u = np.outer(ts**beta, rule.nodes)
    return np.einsum("i,tiz->tz", rule.weights, poisson_law(total * u, z_max))


@dataclass
class ResidualReport:
    max_residual: float
    residuals: np.ndarray = field(repr=False)
    t_grid: np.ndarray = field(repr=False)
    t_min: float
    method: str

    def passed(self, tol: float) -> bool:
        return self.max_residual < tol


def _generator(lam_rates: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """-(sum_j lam_j) p_n + sum_j lam_j p_{n-j}, along the last axis; lam_rates broadcast on the rest."""
    lam_rates = np.asarray(lam_rates, dtype=float)
    out = -lam_rates.sum(axis=-1)[..., None] * probs
    for j in range(lam_rates.shape[-1]):
        out[..., j + 1:] += lam_rates[..., j, None] * probs[..., : -(j + 1)]
    return out


def _time_derivative(t_grid: np.ndarray, vals: np.ndarray, beta: float) -> np.ndarray:
    if beta == 1:
        # five-point stencil; two points at each end stay NaN
        h = t_grid[1] - t_grid[0]
        out = np.full_like(vals, np.nan)
        out[2:-2] = (vals[:-4] - 8 * vals[1:-3] + 8 * vals[3:-1] - vals[4:]) / (12 * h)
        return out
    return np.stack([caputo_numeric(t_grid, vals[:, n], beta) for n in range(vals.shape[1])], axis=1)


def gfcp_governing_check(p: GcpParams, beta: float, t_grid, n_max: int,
                         method: str = "quadrature", t_min: float | None = None) -> ResidualReport:
    """Compare the Caputo derivative of each state probability with the generator.

    The L1 scheme loses accuracy next to t=0, where the state probabilities
    behave like t^beta; points below ``t_min`` (default a tenth of the grid
    span) are left out of the maximum.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    _check(beta, 0.0)
    if method == "quadrature" and beta < 1:
        q = convolution_powers(p.jump_probs, n_max)
        vals = _epoch_law_many(p.total, beta, t_grid, n_max) @ q
    else:
        vals = np.stack([gfcp_pmf(p, beta, float(t), n_max, method=method).probs for t in t_grid])
    deriv = _time_derivative(t_grid, vals, beta)
    resid = np.abs(deriv - _generator(np.asarray(p.lam), vals))
    if t_min is None:
        t_min = t_grid[0] if beta == 1 else t_grid[0] + 0.1 * (t_grid[-1] - t_grid[0])
    keep = (t_grid >= t_min) & np.isfinite(resid).all(axis=1)
    return ResidualReport(float(resid[keep].max()), resid, t_grid, float(t_min), method)


# ---------------------------------------------------------------------------
# non-homogeneous fractional process


def ngfcp_pmf(r: RateFunctionSet, beta: float, t: float, v: float = 0.0,
              n_max: int | None = None) -> TruncatedPmf:
    """Increment law of the non-homogeneous process over [v, v + Y_beta(t)].

    The tail mass is a Chernoff bound mixed over the clock, so it is an
    upper bound rather than the exact excess.
    """
    _check(beta, t)
    if v < 0:
        raise ParameterError("v must be nonnegative")
    if beta == 1:
        return ngcp_increment_pmf(r, t, v, n_max)
    if t == 0:
        return point_mass(n_max or 0, "quadrature")
    rule = rule_for(beta)
    means = r.window_many(t**beta * rule.nodes, v)
    if n_max is None:
        n_max = 8
        while float(rule.weights @ chernoff_tail_many(means, n_max)) >= TAIL_TARGET:
            n_max *= 2
            if n_max > 4096:
                raise ParameterError("truncation level exceeds desk scale")
    probs = rule.weights @ window_pmf_many(means, n_max)
    tail = float(rule.weights @ chernoff_tail_many(means, n_max))
    res = TruncatedPmf(np.clip(probs, 0.0, None), certified(tail), method="quadrature")
    res.notes.append("tail is a mixed Chernoff bound")
    return res


def ngfcp_governing_residual(r: RateFunctionSet, beta: float, t_grid, v: float = 0.0,
                             n_max: int = 10, t_min: float | None = None) -> ResidualReport:
    """Caputo derivative in t of the increment law against the mixed generator.

    The right side is int (generator at time u+v applied to q(u, v)) h_beta(t, u) du.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if not 0 < beta < 1:
        raise ParameterError("the fractional residual needs an order in (0,1)")
    rule = rule_for(beta)
    vals = np.empty((t_grid.size, n_max + 1))
    rhs = np.empty_like(vals)
    for i, t in enumerate(t_grid):
        u = t**beta * rule.nodes
        q = window_pmf_many(r.window_many(u, v), n_max)
        lam = np.moveaxis(r.rate(u + v), 0, -1)
        vals[i] = rule.weights @ q
        rhs[i] = rule.weights @ _generator(lam, q)
    deriv = _time_derivative(t_grid, vals, beta)
    resid = np.abs(deriv - rhs)
    if t_min is None:
        t_min = t_grid[0] + 0.1 * (t_grid[-1] - t_grid[0])
    keep = t_grid >= t_min
    return ResidualReport(float(resid[keep].max()), resid, t_grid, float(t_min), "quadrature")
