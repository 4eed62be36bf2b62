"""GCP driven by stable-type clocks.

* space fractional: M(D_beta(t)) with a stable subordinator;
* multistable: M(H(t)) with a time-varying stability index;
* space-time fractional: M(D_beta(Y_alpha(t))).

All three are compound in the sense of ``core``: the law of the number of
Poisson epochs z is worked out first and pushed through Q[z, n].
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from ..combin import convolution_powers
from ..errors import DivergentSeriesError, EvaluationError, ParameterError
from ..gcp_core import GcpParams, TruncatedPmf, certified, gcp_sample_counts
from ..specfun import (SeriesResult, _log_rgamma_envelope, _sum_log_series, gen_wright_1psi1_series,
                       log_abs_rgamma, mittag_leffler, ml_derivative)
from ..subordinators import (BernsteinFn, StabilityProfile, inverse_stable_marginal,
                             multistable_terminal, slice_power_integral, stable_increment)
from .bell import exp_taylor, power_table
from .core import mc_pmf, point_mass, rule_for
from .tcgcp import DEFAULT_CAP, epoch_law, tcgcp_jump_rates, tcgcp_tails

TAIL_TARGET = 1e-10
SERIES_ABS_TOL = 1e-12
ALTERNATE_ORDER_LIMIT = 30


def _check_index(name: str, v: float, allow_one: bool = False) -> None:
    hi_ok = v <= 1 if allow_one else v < 1
    if not (0 < v and hi_ok):
        raise ParameterError(f"{name} must lie in (0,1{']' if allow_one else ')'}, got {v}")


def _stable_binom(beta: float, n_max: int) -> np.ndarray:
    """|binom(beta, i)| for i = 0..n_max, entry 0 set to zero."""
    out = np.zeros(n_max + 1)
    if n_max:
        i = np.arange(1, n_max + 1, dtype=float)
        ratio = np.concatenate([[beta], (i[1:] - 1 - beta) / i[1:]])
        out[1:] = np.cumprod(ratio)
    return out


def _stable_n_max(p: GcpParams, tails_fn, start: int, cap: int = DEFAULT_CAP):
    n = start
    while True:
        tails = tails_fn(n)
        ok = np.nonzero(tails < TAIL_TARGET)[0]
        if ok.size:
            return int(ok[0]), None
        if n >= cap:
            return n, f"tail {tails[-1]:.3g} still above {TAIL_TARGET:g} at the truncation cap {cap}"
        n = min(cap, 2 * n)


# ---------------------------------------------------------------------------
# space fractional


def gsfcp_epoch_law_psi(total: float, beta: float, t: float, z_max: int) -> tuple[np.ndarray, list[int]]:
    """pi_z = (-1)^z / z! * 1psi1[(1,beta); (1-z,beta); -total^beta t], with the orders that failed the gate.

    The series value grows like z!, so the gate is on the error after
    dividing by z!.
    """
    x = -(total**beta) * t
    out = np.zeros(z_max + 1)
    failed = []
    for z in range(z_max + 1):
        try:
            res = gen_wright_1psi1_series((1.0, beta), (1.0 - z, beta), x)
        except (DivergentSeriesError, EvaluationError):
            failed.append(z)
            continue
        scale = math.exp(-math.lgamma(z + 1))
        if res.error * scale > SERIES_ABS_TOL:
            failed.append(z)
            continue
        out[z] = (-1) ** z * res.value * scale
    return out, failed


def gsfcp_pmf(p: GcpParams, beta: float, t: float, n_max: int | None = None, method: str = "psi",
              rng: np.random.Generator | None = None, sims: int = 100_000) -> TruncatedPmf:
    """State probabilities of M(D_beta(t)).

    ``psi`` sums generalized Wright series per epoch count and falls back to
    the Bell form for counts whose series fails its accuracy gate; ``bell``
    uses the normalized Bell form throughout; ``mc`` samples.
    """
    _check_index("stability index", beta)
    if t < 0:
        raise ParameterError("t must be nonnegative")
    if method not in ("psi", "bell", "mc"):
        raise ParameterError(f"unknown method {method!r}")
    f = BernsteinFn.stable(beta)
    note = None
    if n_max is None:
        if t == 0:
            n_max = 0
        else:
            n_max, note = _stable_n_max(p, lambda n: tcgcp_tails(f, p, t, n), max(16, int(4 * p.total * t) + 16))
    if t == 0:
        return point_mass(n_max, method)
    if method == "mc":
        rng = rng if rng is not None else np.random.default_rng()
        return mc_pmf(gsfcp_sample(p, beta, t, sims, rng), n_max)
    q = convolution_powers(p.jump_probs, n_max)
    notes = [note] if note else []
    if method == "psi":
        law, failed = gsfcp_epoch_law_psi(p.total, beta, t, n_max)
        if failed:
            bell = epoch_law(f, p.total, t, n_max)
            law[failed] = bell[failed]
            notes.append(f"generalized Wright series failed the accuracy gate for {len(failed)} epoch counts; "
                         "those use the Bell form")
    else:
        law = epoch_law(f, p.total, t, n_max)
    probs = law @ q
    tail = float(tcgcp_tails(f, p, t, n_max)[-1])
    res = TruncatedPmf(np.clip(probs, 0.0, None), certified(tail), method=method)
    res.notes.extend(notes)
    return res


def gsfcp_pgf(p: GcpParams, beta: float, u, t: float):
    """exp(-t (sum_j lam_j (1 - u^j))^beta)."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(np.abs(u_arr) > 1):
        raise ParameterError("pgf argument must satisfy |u| <= 1")
    return np.exp(-t * (-p.jump_symbol(u_arr)) ** beta)


def gsfcp_jump_rates(p: GcpParams, beta: float, n: int) -> float:
    """Rate of jumps of size n; these sum to total^beta."""
    return tcgcp_jump_rates(BernsteinFn.stable(beta), p, n)


def gsfcp_sample(p: GcpParams, beta: float, t: float, size: int, rng: np.random.Generator) -> np.ndarray:
    return gcp_sample_counts(p, stable_increment(beta, t, rng, size), size, rng)


def gsfcp_min_uniform_mc(p: GcpParams, beta: float, u: float, t: float, size: int,
                         rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo of Pr(min_{i <= N} X_i^(1/beta) >= 1 - sum_j lam_j u^j / total).

    N ~ Poisson(total^beta t) and the X_i are uniform; an empty minimum is 1.
    Returns (estimate, standard error).
    """
    if not 0 < u < 1:
        raise ParameterError("u must lie in (0,1)")
    counts = rng.poisson(p.total**beta * t, size)
    return _min_uniform(p, beta, u, counts, rng)


def _min_uniform(p, beta, u, counts, rng):
    thr = 1.0 - float(np.dot(p.lam, u ** p.sizes)) / p.total
    # minimum of N uniforms: 1 - V^(1/N)
    v = rng.random(counts.size)
    with np.errstate(divide="ignore"):
        mins = np.where(counts > 0, 1.0 - v ** (1.0 / np.maximum(counts, 1)), 1.0)
    hits = mins ** (1.0 / beta) >= thr
    est = float(hits.mean())
    return est, math.sqrt(max(est * (1 - est), 1e-300) / counts.size)


# ---------------------------------------------------------------------------
# multistable


def _slice_rates(profile: StabilityProfile, lam: float, n_max: int, t: float, dt: float) -> np.ndarray:
    n = int(math.ceil(t / dt - 1e-9))
    starts = dt * np.arange(n)
    steps = np.minimum(dt, t - starts)
    out = np.zeros(n_max + 1)
    for h, b in zip(steps, np.asarray(profile(starts), dtype=float)):
        out += h * lam**b * _stable_binom(b, n_max)
    return out


def _gsmcp_state_probs(p: GcpParams, n_max: int, exponent: float, rates: np.ndarray) -> np.ndarray:
    q = convolution_powers(p.jump_probs, n_max)
    law = math.exp(-exponent) * exp_taylor(rates, 1.0, n_max)
    return law @ q


def gsmcp_state_probs(profile: StabilityProfile, p: GcpParams, t: float, n_max: int,
                      slice_dt: float | None = None) -> np.ndarray:
    """Pr(M(H(t)) = n) for n = 0..n_max.

    With ``slice_dt`` the clock is the piecewise-constant slice
    approximation that the sampler simulates.
    """
    if t < 0:
        raise ParameterError("t must be nonnegative")
    if t == 0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    profile.validate(t)
    if slice_dt is None:
        g = profile.power_integral(p.total, t)
        rates = profile.poisson_jump_rates(p.total, n_max, t)
    else:
        g = slice_power_integral(profile, p.total, t, slice_dt)
        rates = _slice_rates(profile, p.total, n_max, t, slice_dt)
    return _gsmcp_state_probs(p, n_max, g, rates)


def gsmcp_first_passage(profile: StabilityProfile, p: GcpParams, m: int, t: float,
                        slice_dt: float | None = None) -> float:
    """Pr(T_m > t) for the first upcrossing T_m of level m."""
    if m < 1:
        raise ParameterError("level must be at least one")
    probs = gsmcp_state_probs(profile, p, t, m - 1, slice_dt)
    return float(min(max(math.fsum(probs), 0.0), 1.0))


def gsmcp_levy_weights(profile: StabilityProfile, p: GcpParams, t: float, n) -> np.ndarray | float:
    """Atom weight of the Levy measure at size n at time t; n may be an int or an array."""
    n_arr = np.atleast_1d(np.asarray(n, dtype=int))
    if np.any(n_arr < 1):
        raise ParameterError("atoms sit at sizes n >= 1")
    n_max = int(n_arr.max())
    b = float(profile(t))
    if not 0 < b < 1:
        raise ParameterError("stability index must lie in (0,1)")
    q = convolution_powers(p.jump_probs, n_max)
    weights = p.total**b * (_stable_binom(b, n_max) @ q)
    out = weights[n_arr]
    return float(out[0]) if np.ndim(n) == 0 else out


def gsmcp_bernstein(profile: StabilityProfile, p: GcpParams, u: float, t: float) -> float:
    """Closed form of sum_n weight(n) (1 - e^{-un}): (sum_j lam_j (1 - e^{-uj}))^beta(t)."""
    return float(np.dot(p.lam, 1.0 - np.exp(-u * p.sizes)) ** float(profile(t)))


def gsmcp_bernstein_series(profile: StabilityProfile, p: GcpParams, u: float, t: float,
                           n_terms: int = 200) -> tuple[float, float]:
    """Partial sum of weight(n) (1 - e^{-un}) over n <= n_terms plus the weight beyond n_terms.

    The weights beyond n_terms come from the closed-form rate tail; charging
    them in full overstates the series by at most e^{-u(n_terms+1)} times
    that tail, which is returned as the second element.
    """
    n = np.arange(1, n_terms + 1)
    partial = float(np.dot(gsmcp_levy_weights(profile, p, t, n), 1.0 - np.exp(-u * n)))
    from .tcgcp import tcgcp_rate_tails

    rest = float(tcgcp_rate_tails(BernsteinFn.stable(float(profile(t))), p, n_terms)[-1])
    return partial + rest, math.exp(-u * (n_terms + 1)) * rest


def gsmcp_first_passage_mc(profile: StabilityProfile, p: GcpParams, m: int, t: float, size: int,
                           rng: np.random.Generator, dt: float | None = None) -> dict:
    """MC estimate of Pr(T_m > t) over slice-built multistable clocks.

    The returned ``slice_bias`` is the exact gap between the target law and
    the law of the slice process that is actually simulated.
    """
    clock, used_dt = multistable_terminal(profile, t, dt, rng, size)
    counts = gcp_sample_counts(p, clock, size, rng)
    est = float((counts < m).mean())
    se = math.sqrt(max(est * (1 - est), 1e-300) / size)
    exact = gsmcp_first_passage(profile, p, m, t)
    sliced = gsmcp_first_passage(profile, p, m, t, slice_dt=used_dt)
    return {"estimate": est, "se": se, "dt": used_dt, "analytic": exact,
            "slice_analytic": sliced, "slice_bias": abs(exact - sliced)}


# ---------------------------------------------------------------------------
# space-time fractional


def _gstfcp_series(c: float, alpha: float, beta: float, z: int) -> SeriesResult:
    """sum_m (-c)^m Gamma(beta m + 1) / (Gamma(alpha m + 1) Gamma(beta m + 1 - z))."""
    lc = math.log(c)

    def block(m):
        la = special.gammaln(beta * m + 1)
        ld = special.gammaln(alpha * m + 1)
        lr, sr = log_abs_rgamma(beta * m + 1 - z)
        base = m * lc + la - ld
        env = base + _log_rgamma_envelope(beta * m + 1 - z)
        sign = sr * np.where(m % 2 == 0, 1.0, -1.0)
        scale = m * abs(lc) + la + ld + np.abs(env - base)
        return base + lr, sign, env, scale

    # entire in c for every pair of indices, but terms can swell before they
    # decay; locate the envelope peak so the stopping rule starts after it
    probe = np.arange(0, 64, dtype=float)
    while True:
        env = block(probe)[2]
        top = int(np.argmax(env))
        if top < probe.size - 8:
            break
        probe = np.arange(0, 2 * probe.size, dtype=float)
        if probe.size > 1 << 16:
            raise DivergentSeriesError("series envelope still rising after 65536 terms",
                                       ratio=math.exp(float(env[-1] - env[-2])))
    peak = int(probe[top])
    return _sum_log_series(block, peak=peak, growth_guard=2 * peak + 20)


def gstfcp_epoch_law_series(total: float, alpha: float, beta: float, t: float,
                            z_max: int) -> tuple[np.ndarray, list[int]]:
    """Double-series epoch law and the counts whose series overflowed or missed the gate.

    Raises DivergentSeriesError when the series diverges for every count.
    """
    c = total**beta * t**alpha
    out = np.zeros(z_max + 1)
    failed = []
    for z in range(z_max + 1):
        try:
            res = _gstfcp_series(c, alpha, beta, z)
        except DivergentSeriesError:
            raise
        except EvaluationError:
            failed.append(z)
            continue
        scale = math.exp(-math.lgamma(z + 1))
        if res.error * scale > SERIES_ABS_TOL:
            failed.append(z)
            continue
        out[z] = (-1) ** z * res.value * scale
    return out, failed


def gstfcp_epoch_law_alternate(total: float, alpha: float, beta: float, t: float, z_max: int):
    """sum_j c^j E^{(j)}_{alpha,1}(-c) P[j, z], with P the normalized partial Bell table of |binom(beta, i)|."""
    if z_max > ALTERNATE_ORDER_LIMIT:
        raise ParameterError(f"alternate form limited to epoch counts <= {ALTERNATE_ORDER_LIMIT}")
    c = total**beta * t**alpha
    table = power_table(_stable_binom(beta, z_max), z_max)
    d = np.array([mittag_leffler(alpha, 1.0, -c)] +
                 [math.exp(j * math.log(c)) * ml_derivative(alpha, 1.0, -c, j) for j in range(1, z_max + 1)])
    return d @ table


def gstfcp_epoch_law_quadrature(total: float, alpha: float, beta: float, t: float, z_max: int):
    rule = rule_for(alpha)
    law = epoch_law(BernsteinFn.stable(beta), total, t**alpha * rule.nodes, z_max)
    return law @ rule.weights


def gstfcp_tails(p: GcpParams, alpha: float, beta: float, t: float, n_max: int) -> np.ndarray:
    if alpha == 1:
        return tcgcp_tails(BernsteinFn.stable(beta), p, t, n_max)
    rule = rule_for(alpha)
    tails = tcgcp_tails(BernsteinFn.stable(beta), p, t**alpha * rule.nodes, n_max)
    return np.clip(rule.weights @ tails, 0.0, 1.0)


def gstfcp_pmf(p: GcpParams, alpha: float, beta: float, t: float, n_max: int | None = None,
               method: str = "series", rng: np.random.Generator | None = None,
               sims: int = 100_000) -> TruncatedPmf:
    """State probabilities of M(D_beta(Y_alpha(t))).

    ``series`` sums the double series and falls back to quadrature against
    the inverse stable density, then to sampling; each fallback is noted.
    """
    _check_index("time index", alpha, allow_one=True)
    _check_index("space index", beta, allow_one=True)
    if t < 0:
        raise ParameterError("t must be nonnegative")
    if method not in ("series", "alternate", "quadrature", "mc"):
        raise ParameterError(f"unknown method {method!r}")
    if beta == 1:
        from .gfcp import gfcp_pmf

        res = gfcp_pmf(p, alpha, t, n_max, method="quadrature" if method == "series" else
                       ("ml" if method == "alternate" else method), rng=rng, sims=sims)
        res.notes.append("space index one: fractional GCP law")
        return res
    if alpha == 1 and method != "mc":
        res = gsfcp_pmf(p, beta, t, n_max)
        res.notes.append("time index one: space fractional law")
        return res
    notes = []
    if n_max is None:
        if t == 0:
            n_max = 0
        else:
            n_max, note = _stable_n_max(p, lambda n: gstfcp_tails(p, alpha, beta, t, n),
                                        max(16, int(4 * p.total * max(t, 1.0)) + 16))
            if note:
                notes.append(note)
    if t == 0:
        return point_mass(n_max, method)
    if method == "mc":
        rng = rng if rng is not None else np.random.default_rng()
        return mc_pmf(gstfcp_sample(p, alpha, beta, t, sims, rng), n_max)
    q = convolution_powers(p.jump_probs, n_max)
    used = method
    law = None
    if method == "series":
        try:
            law, failed = gstfcp_epoch_law_series(p.total, alpha, beta, t, n_max)
        except DivergentSeriesError as exc:
            notes.append(f"double series unusable ({exc}; term ratio {exc.ratio}); fell back to quadrature")
        else:
            if failed:
                try:
                    quad = gstfcp_epoch_law_quadrature(p.total, alpha, beta, t, n_max)
                except EvaluationError:
                    law = None
                    notes.append("double series failed for some counts and quadrature failed too")
                else:
                    law[failed] = quad[failed]
                    notes.append(f"double series missed the accuracy gate for {len(failed)} epoch counts; "
                                 "those use quadrature")
    elif method == "alternate":
        law = gstfcp_epoch_law_alternate(p.total, alpha, beta, t, n_max)
    if law is None:
        try:
            law = gstfcp_epoch_law_quadrature(p.total, alpha, beta, t, n_max)
        except EvaluationError as exc:
            notes.append(f"quadrature failed ({exc}); fell back to sampling")
            rng = rng if rng is not None else np.random.default_rng()
            res = mc_pmf(gstfcp_sample(p, alpha, beta, t, sims, rng), n_max)
            res.notes.extend(notes)
            return res
        used = "quadrature"
    probs = law @ q
    tail = float(gstfcp_tails(p, alpha, beta, t, n_max)[-1])
    res = TruncatedPmf(np.clip(probs, 0.0, None), certified(tail), method=used)
    res.notes.extend(notes)
    return res


def gstfcp_pgf(p: GcpParams, alpha: float, beta: float, u, t: float):
    """E_{alpha,1}(-(sum_j lam_j (1 - u^j))^beta t^alpha)."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(np.abs(u_arr) > 1):
        raise ParameterError("pgf argument must satisfy |u| <= 1")
    return mittag_leffler(alpha, 1.0, -((-p.jump_symbol(u_arr)) ** beta) * t**alpha)


def gstfcp_sample(p: GcpParams, alpha: float, beta: float, t: float, size: int,
                  rng: np.random.Generator) -> np.ndarray:
    clock = np.full(size, float(t)) if alpha == 1 else inverse_stable_marginal(alpha, t, rng, size)
    if beta < 1:
        clock = np.where(clock > 0, stable_increment(beta, np.maximum(clock, 1e-300), rng, size), 0.0)
    return gcp_sample_counts(p, clock, size, rng)


def gstfcp_min_uniform_mc(p: GcpParams, alpha: float, beta: float, u: float, t: float, size: int,
                          rng: np.random.Generator) -> tuple[float, float]:
    """Min-uniform identity over a fractional Poisson count with rate total^beta."""
    if not 0 < u < 1:
        raise ParameterError("u must lie in (0,1)")
    clock = inverse_stable_marginal(alpha, t, rng, size)
    counts = rng.poisson(p.total**beta * clock)
    return _min_uniform(p, beta, u, counts, rng)
