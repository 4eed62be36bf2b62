"""GCP run on the clock of an independent Levy subordinator, M(D_f(t)).

With Lambda the total rate, a subordinator jump carries Z Poisson epochs,
where Z has rates b_z = (-1)^(z+1) f^(z)(Lambda) Lambda^z / z! (these sum to
f(Lambda)).  Each epoch then adds a GCP jump, so the count jumps by n at rate
r(n) = sum_z b_z Q[z, n].  Everything below is phrased through b and Q,
which keeps all intermediate quantities nonnegative.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import gammainc

from ..combin import convolution_powers, omega_weighted_sum
from ..errors import EvaluationError, NumericalConsistencyError, ParameterError
from ..gcp_core import GcpParams, TruncatedPmf, certified, gcp_sample_counts, survival_of
from ..subordinators import BernsteinFn, gamma_increment, inverse_stable_marginal
from .bell import exp_taylor, reciprocal_taylor
from .core import FirstPassageLaw, mc_pmf, overshoot_matrix, point_mass

LITERAL_LIMIT = 60
DEFAULT_CAP = 512
TAIL_TARGET = 1e-10
NEGATIVE_RATE_TOL = 1e-12


# ---------------------------------------------------------------------------
# jump rates


def tcgcp_jump_rates(f: BernsteinFn, p: GcpParams, n: int) -> float:
    """Rate of jumps of size n, summed over compositions with f-derivatives.

    Above order ``LITERAL_LIMIT`` the derivative form is replaced by the
    equivalent Taylor-coefficient form of ``tcgcp_rate_table``.
    """
    if n < 1:
        raise ParameterError("jump size must be at least one")
    if n > LITERAL_LIMIT:
        return float(tcgcp_rate_table(f, p, n)[n])
    lam = p.total

    def g(z: int) -> float:
        return (-1) ** (z + 1) * f.deriv(z, lam)

    rate = omega_weighted_sum(p.k, n, p.lam, g)
    if rate < -NEGATIVE_RATE_TOL:
        raise NumericalConsistencyError(f"jump rate of size {n} came out negative ({rate:.3g})")
    return max(rate, 0.0)


def _tables(f: BernsteinFn, p: GcpParams, n_max: int):
    b = f.poisson_jump_rates(p.total, n_max)
    q = convolution_powers(p.jump_probs, n_max)
    return b, q


def tcgcp_rate_table(f: BernsteinFn, p: GcpParams, n_max: int) -> np.ndarray:
    """r(0..n_max) with r(0) = 0."""
    b, q = _tables(f, p, n_max)
    return b @ q


def _epoch_survival(p: GcpParams, n_max: int, q: np.ndarray) -> np.ndarray:
    """S[z, m] = Pr(S_z > m), grown one jump at a time from nonnegative pieces."""
    surv_x = survival_of(p.jump_probs, n_max)
    s = np.zeros((n_max + 1, n_max + 1))
    for z in range(1, n_max + 1):
        s[z] = s[z - 1] + np.convolve(q[z - 1], surv_x)[: n_max + 1]
    return np.minimum(s, 1.0)


def tcgcp_rate_tails(f: BernsteinFn, p: GcpParams, n_max: int, b=None, q=None) -> np.ndarray:
    """R(m) = sum_{n > m} r(n) for m = 0..n_max.

    Epoch counts above m always overshoot, so their rates come from the
    closed-form tail of b; smaller epoch counts overshoot with Pr(S_z > m).
    """
    if b is None or q is None:
        b, q = _tables(f, p, n_max)
    s = _epoch_survival(p, n_max, q)
    out = np.empty(n_max + 1)
    for m in range(n_max + 1):
        out[m] = np.dot(b[1: m + 1], s[1: m + 1, m]) + f.poisson_jump_tail(p.total, m)
    return out


def tcgcp_rate_sum(f: BernsteinFn, p: GcpParams, tol: float = 1e-12, cap: int = 4096) -> tuple[float, float, int]:
    """(partial sum of rates, remainder, N) with N doubled until the remainder is below tol or N hits cap.

    The remainder is R(N) from ``tcgcp_rate_tails``; for slowly decaying
    families it stays sizeable at any practical N.
    """
    n = 32
    while True:
        b, q = _tables(f, p, n)
        rates = b @ q
        rem = tcgcp_rate_tails(f, p, n, b, q)[-1]
        if rem < tol or n >= cap:
            return math.fsum(rates[1:]), rem, n
        n *= 2


# ---------------------------------------------------------------------------
# state probabilities


def epoch_law(f: BernsteinFn, lam: float, s, z_max: int, b=None) -> np.ndarray:
    """P[z] = Pr(N(D_f(s)) = z) for a rate-lam Poisson process N; s may be an array."""
    if b is None:
        b = f.poisson_jump_rates(lam, z_max)
    big = float(f(lam))
    s = np.asarray(s, dtype=float)
    if np.max(s, initial=0.0) * big < 600:
        return np.exp(-s * big) * exp_taylor(b, s, z_max)
    # mixture over the number of subordinator jumps, safe for large s f(lam)
    from .core import poisson_law

    # every subordinator jump carries at least one epoch, so z_max jumps suffice
    v = convolution_powers(b[1:] / big, z_max)
    j = poisson_law(big * s, z_max)
    return np.moveaxis(j @ v, -1, 0)


def _choose_n_max(f, p, t, cap=DEFAULT_CAP):
    n = max(16, int(4 * p.total * t) + 16)
    while True:
        tail = tcgcp_tails(f, p, t, n)
        ok = np.nonzero(tail < TAIL_TARGET)[0]
        if ok.size:
            return int(ok[0]), None
        if n >= cap:
            return n, f"tail {tail[-1]:.3g} still above {TAIL_TARGET:g} at the truncation cap {cap}"
        n = min(cap, 2 * n)


def tcgcp_tails(f, p, t, n_max, b=None, q=None):
    """Pr(M(D_f(t)) > m) for m = 0..n_max from the time-integrated forward equation.

    ``t`` may be an array; the result then has shape t.shape + (n_max+1,).
    """
    if b is None or q is None:
        b, q = _tables(f, p, n_max)
    big = float(f(p.total))
    rt = tcgcp_rate_tails(f, p, n_max, b, q)
    v = convolution_powers(b[1:] / big, n_max)
    j = np.arange(n_max + 1)
    t = np.asarray(t, dtype=float)
    integrated = (gammainc(j + 1.0, big * t[..., None]) @ v) / big  # int_0^t P_z(s) ds
    occ = integrated @ q
    return occ @ overshoot_matrix(rt)


def _ode_solve(f, p, t, n_max, b, q):
    rates = b @ q
    rt = tcgcp_rate_tails(f, p, n_max, b, q)
    big = float(f(p.total))
    size = n_max + 2
    a = np.zeros((size, size))
    for n in range(n_max + 1):
        a[n, n] = -big
        a[n, :n] += rates[1: n + 1][::-1]
        a[n_max + 1, n] = rt[n_max - n]
    u0 = np.zeros(size)
    u0[0] = 1.0
    sol = integrate.solve_ivp(lambda _t, u: a @ u, (0.0, t), u0, method="Radau", jac=a,
                              rtol=1e-11, atol=1e-13, t_eval=[t])
    if not sol.success:
        raise EvaluationError(f"forward-equation integration failed: {sol.message}")
    u = sol.y[:, -1]
    return np.clip(u[:-1], 0.0, None), max(float(u[-1]), 0.0)


def tcgcp_pmf(f: BernsteinFn, p: GcpParams, t: float, n_max: int | None = None,
              method: str = "ode", rng: np.random.Generator | None = None,
              sims: int = 100_000) -> TruncatedPmf:
    """State probabilities of M(D_f(t)).

    ``ode`` integrates the lower-triangular forward system together with
    an absorbing overflow state; ``bell`` evaluates the closed form; ``mc``
    samples M(D_f(t)).
    """
    if t < 0:
        raise ParameterError("t must be nonnegative")
    if method not in ("ode", "bell", "mc"):
        raise ParameterError(f"unknown method {method!r}")
    note = None
    if n_max is None:
        n_max, note = (0, None) if t == 0 else _choose_n_max(f, p, t)
    if t == 0:
        return point_mass(n_max, method)
    if method == "mc":
        rng = rng if rng is not None else np.random.default_rng()
        return mc_pmf(tcgcp_sample_counts(f, p, t, sims, rng), n_max)
    b, q = _tables(f, p, n_max)
    if method == "ode":
        probs, tail = _ode_solve(f, p, t, n_max, b, q)
    else:
        probs = epoch_law(f, p.total, t, n_max, b) @ q
        tail = float(tcgcp_tails(f, p, t, n_max, b, q)[-1])
    res = TruncatedPmf(probs, certified(tail), method=method)
    if note:
        res.notes.append(note)
    return res


def tcgcp_pgf(f: BernsteinFn, p: GcpParams, u, t: float):
    """exp(-t f(sum_j lam_j (1 - u^j)))."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(np.abs(u_arr) > 1):
        raise ParameterError("pgf argument must satisfy |u| <= 1")
    return np.exp(-t * f(-p.jump_symbol(u_arr)))


# ---------------------------------------------------------------------------
# first passage and hitting


def tcgcp_survival(f: BernsteinFn, p: GcpParams, n: int, s) -> np.ndarray:
    """Pr(T^n > s) = Pr(M(D_f(s)) < n)."""
    if n < 1:
        raise ParameterError("level must be at least one")
    b, q = _tables(f, p, n)
    law = epoch_law(f, p.total, s, n, b)
    return np.tensordot(q[:, :n].sum(axis=1), law, axes=(0, 0))


def tcgcp_first_passage(f: BernsteinFn, p: GcpParams, n: int, s, route: str = "derivative"):
    """Density of T^n = inf{s : M(D_f(s)) >= n}.

    ``derivative`` differentiates the survival function term by term;
    ``flux`` multiplies each occupation probability below n by the rate of
    jumping to n or beyond.
    """
    if n < 1:
        raise ParameterError("level must be at least one")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ParameterError("s must be nonnegative")
    b, q = _tables(f, p, n)
    big = float(f(p.total))
    law = epoch_law(f, p.total, s_arr, n, b)  # (z, ...)
    if route == "derivative":
        shifted = np.zeros_like(law)
        for i in range(1, n + 1):
            shifted[i:] += b[i] * law[: n + 1 - i]
        dz = big * law - shifted  # -d/ds P_z
        out = np.tensordot(q[:, :n].sum(axis=1), dz, axes=(0, 0))
    elif route == "flux":
        rt = tcgcp_rate_tails(f, p, n, b, q)
        occ = np.tensordot(q[:, :n], law, axes=(0, 0))  # (l, ...)
        out = np.tensordot(rt[: n][::-1], occ, axes=(0, 0))
    else:
        raise ParameterError(f"unknown route {route!r}")
    return float(out) if out.ndim == 0 else out


def tcgcp_first_passage_law(f: BernsteinFn, p: GcpParams, n: int) -> FirstPassageLaw:
    def density(s):
        return tcgcp_first_passage(f, p, n, s)

    def cdf(s):
        out = 1.0 - tcgcp_survival(f, p, n, s)
        return float(out) if np.ndim(out) == 0 else out

    # the count grows without bound, so level n is passed almost surely
    return FirstPassageLaw(n, density, cdf, 1.0, kind="first_passage", method="derivative")


def tcgcp_occupation(f: BernsteinFn, p: GcpParams, n_max: int) -> np.ndarray:
    """Expected total time spent in each state 0..n_max."""
    b, q = _tables(f, p, n_max)
    h = reciprocal_taylor(float(f(p.total)), b, n_max)
    return h @ q


def tcgcp_hitting_prob(f: BernsteinFn, p: GcpParams, n: int, route: str = "occupation") -> float:
    """Pr(the count ever equals n).

    ``occupation``: sum over l < n of expected time at l times r(n - l).
    ``renewal``: the jump chain visits n with probability u_n solving
    u_n = sum_j (r(j)/f(Lambda)) u_{n-j}, u_0 = 1.
    """
    if n < 1:
        raise ParameterError("level must be at least one")
    rates = tcgcp_rate_table(f, p, n)
    if route == "occupation":
        occ = tcgcp_occupation(f, p, n)
        val = float(np.dot(occ[:n], rates[1: n + 1][::-1]))
    elif route == "renewal":
        step = rates / float(f(p.total))
        u = np.zeros(n + 1)
        u[0] = 1.0
        for m in range(1, n + 1):
            u[m] = np.dot(step[1: m + 1], u[m - 1:: -1][:m])
        val = float(u[n])
    else:
        raise ParameterError(f"unknown route {route!r}")
    return min(max(val, 0.0), 1.0)


def tcgcp_hitting_law(f: BernsteinFn, p: GcpParams, n: int) -> FirstPassageLaw:
    """Defective law of the hitting time of state n.

    Its density at s is sum_{l<n} p_f(l, s) r(n - l); the total mass is the
    hitting probability.
    """
    rates = tcgcp_rate_table(f, p, n)
    b, q = _tables(f, p, n)

    def density(s):
        law = epoch_law(f, p.total, s, n, b)
        occ = np.tensordot(q[:, :n], law, axes=(0, 0))
        out = np.tensordot(rates[1: n + 1][::-1], occ, axes=(0, 0))
        return float(out) if np.ndim(out) == 0 else out

    def cdf(s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        big = float(f(p.total))
        v = convolution_powers(b[1:] / big, n)
        j = np.arange(n + 1)
        integ = gammainc(j + 1.0, big * s_arr[:, None]) @ v / big
        out = (integ @ q[:, :n]) @ rates[1: n + 1][::-1]
        return float(out[0]) if np.ndim(s) == 0 else out

    mass = tcgcp_hitting_prob(f, p, n)
    return FirstPassageLaw(n, density, cdf, mass, kind="hitting", method="occupation")


# ---------------------------------------------------------------------------
# sampling


def tcgcp_sample_counts(f: BernsteinFn, p: GcpParams, t: float, size: int,
                        rng: np.random.Generator) -> np.ndarray:
    clock = f.sample(t, rng, size)
    return gcp_sample_counts(p, clock, size, rng)


def tcgfcp_sample(f: BernsteinFn, p: GcpParams, beta: float, t: float, size: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Draws of M(Y_beta(D_f(t)))."""
    if not 0 < beta <= 1:
        raise ParameterError("fractional order must lie in (0,1]")
    clock = f.sample(t, rng, size)
    if beta < 1:
        clock = inverse_stable_marginal(beta, clock, rng)
    return gcp_sample_counts(p, clock, size, rng)


def sample_epoch_counts(f: BernsteinFn, lam: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Poisson epochs carried by one subordinator jump, law b_z / f(lam) on z >= 1."""
    if f.family == "gamma":
        return rng.logseries(lam / (f.a + lam), size)
    if f.family == "stable":
        # Pr(Z > z) = E (1 - w)^z with w ~ Beta(beta, 1 - beta): geometric given w
        w = rng.beta(f.beta, 1.0 - f.beta, size)
        return rng.geometric(np.maximum(w, 1e-300))
    raise ParameterError("epoch sampling needs a stable or gamma Bernstein function")


def sample_jump_sizes(f: BernsteinFn, p: GcpParams, size: int, rng: np.random.Generator) -> np.ndarray:
    z = sample_epoch_counts(f, p.total, size, rng)
    counts = rng.multinomial(z, p.jump_probs)
    return counts @ p.sizes


def tcgcp_passage_mc(f: BernsteinFn, p: GcpParams, n: int, size: int,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Event-driven draws: (first passage time to >= n, whether n was hit exactly)."""
    big = float(f(p.total))
    level = np.zeros(size, dtype=np.int64)
    clock = np.zeros(size)
    hit = np.zeros(size, dtype=bool)
    active = np.ones(size, dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0]
        clock[idx] += rng.exponential(1.0 / big, idx.size)
        level[idx] += sample_jump_sizes(f, p, idx.size, rng)
        done = level[idx] >= n
        hit[idx[done]] = level[idx[done]] == n
        active[idx[done]] = False
    return clock, hit


def _operational_level(p: GcpParams, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Time at which the base GCP first reaches n or more."""
    level = np.zeros(size, dtype=np.int64)
    clock = np.zeros(size)
    active = np.ones(size, dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0]
        clock[idx] += rng.exponential(1.0 / p.total, idx.size)
        level[idx] += rng.choice(p.sizes, size=idx.size, p=p.jump_probs)
        active[idx[level[idx] >= n]] = False
    return clock


def gamma_passage_times(f: BernsteinFn, levels: np.ndarray, rng: np.random.Generator,
                        resolution: float = 1e-9) -> np.ndarray:
    """inf{s : D(s) > level} for a gamma subordinator D, one independent path per level.

    The path is stepped until it crosses, then the crossing step is
    bisected with exact gamma-bridge midpoints: given D at both ends, the
    midpoint fraction is Beta(b h/2, b h/2).
    """
    if f.family != "gamma":
        raise ParameterError("bridge bisection needs a gamma subordinator")
    levels = np.asarray(levels, dtype=float)
    m = levels.size
    step = max(float(np.median(levels)) * f.a / f.b, 1e-3)
    lo_t = np.zeros(m)
    lo_d = np.zeros(m)
    hi_t = np.zeros(m)
    hi_d = np.zeros(m)
    active = np.ones(m, dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0]
        inc = gamma_increment(f.a, f.b, step, rng, idx.size)
        new_d = lo_d[idx] + inc
        cross = new_d > levels[idx]
        c, nc = idx[cross], idx[~cross]
        hi_t[c] = lo_t[c] + step
        hi_d[c] = new_d[cross]
        lo_t[nc] += step
        lo_d[nc] = new_d[~cross]
        active[c] = False
    width = step
    while width > resolution:
        half = width / 2
        frac = rng.beta(f.b * half, f.b * half, m)
        mid_d = lo_d + (hi_d - lo_d) * frac
        mid_t = lo_t + half
        up = mid_d > levels
        hi_t = np.where(up, mid_t, hi_t)
        hi_d = np.where(up, mid_d, hi_d)
        lo_t = np.where(up, lo_t, mid_t)
        lo_d = np.where(up, lo_d, mid_d)
        width = half
    return hi_t


def tcgcp_first_passage_mc(f: BernsteinFn, p: GcpParams, n: int, size: int,
                           rng: np.random.Generator, method: str = "auto") -> np.ndarray:
    """Draws of T^n.

    ``bridge`` (gamma only) simulates the subordinator path itself and
    finds where it first exceeds the operational time at which the base
    process reaches n; ``events`` simulates the time-changed jump chain.
    """
    if method == "auto":
        method = "bridge" if f.family == "gamma" else "events"
    if method == "bridge":
        return gamma_passage_times(f, _operational_level(p, n, size, rng), rng)
    if method == "events":
        return tcgcp_passage_mc(f, p, n, size, rng)[0]
    raise ParameterError(f"unknown method {method!r}")
