"""Moments of M(D_f(Y_alpha(t))) and a correlation-exponent estimator.

Writing q1 = E M(D_f(1)) and q2 = Var M(D_f(1)), conditioning on the
inverse stable clock gives

    mean = q1 E Y(t),   var = q2 E Y(t) + q1^2 Var Y(t),
    cov(s, t) = q2 E Y(s) + q1^2 Cov(Y(s), Y(t)),   s <= t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import hyp2f1

from ..errors import EvaluationError, ParameterError
from ..gcp_core import GcpParams, gcp_sample_counts
from ..subordinators import BernsteinFn, standard_stable


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha <= 1:
        raise ParameterError(f"inverse stable index must lie in (0,1], got {alpha}")


def inverse_stable_mean(alpha: float, t):
    _check_alpha(alpha)
    return np.asarray(t, dtype=float) ** alpha / math.gamma(1 + alpha)


def inverse_stable_variance(alpha: float, t):
    _check_alpha(alpha)
    g1, g2 = math.gamma(1 + alpha), math.gamma(1 + 2 * alpha)
    return (2.0 / g2 - 1.0 / g1**2) * np.asarray(t, dtype=float) ** (2 * alpha)


def inverse_stable_cov(alpha: float, s: float, t):
    """Cov(Y(s), Y(t)) for s <= t.

    E Y(s)Y(t) = s^{2a}/G(2a+1) + (st)^a 2F1(a, -a; a+1; s/t) / G(a+1)^2, and
    the product of means is subtracted inside the hypergeometric factor.
    """
    _check_alpha(alpha)
    t = np.asarray(t, dtype=float)
    if s < 0 or np.any(t < s):
        raise ParameterError("covariance needs 0 <= s <= t")
    if alpha == 1:
        return np.zeros_like(t)
    if s == 0:
        return np.zeros_like(t)
    g1 = math.gamma(1 + alpha)
    x = s / t
    return s ** (2 * alpha) / math.gamma(1 + 2 * alpha) + (s * t) ** alpha * (
        hyp2f1(alpha, -alpha, alpha + 1, x) - 1.0) / g1**2


def count_moments_unit(f: BernsteinFn, p: GcpParams) -> tuple[float, float]:
    """(q1, q2): mean and variance of the subordinated GCP at time one."""
    m1 = float(np.dot(p.sizes, p.lam))
    m2 = float(np.dot(p.sizes**2, p.lam))
    ed, vd = f.mean(1.0), f.variance(1.0)
    return m1 * ed, m1**2 * vd + m2 * ed


@dataclass
class MfaMoments:
    mean: np.ndarray
    var: np.ndarray
    cov: np.ndarray
    q1: float
    q2: float
    var_s: float

    @property
    def corr(self) -> np.ndarray:
        return self.cov / np.sqrt(self.var_s * self.var)


def mfa_moments(f: BernsteinFn, p: GcpParams, alpha: float, s: float, t) -> MfaMoments:
    """Mean and variance at t, and Cov with the value at s (s <= t).

    Raises InfiniteMomentError for subordinators without second moments,
    e.g. the stable family.
    """
    q1, q2 = count_moments_unit(f, p)
    t = np.asarray(t, dtype=float)
    ey = inverse_stable_mean(alpha, t)
    vy = np.zeros_like(t) if alpha == 1 else inverse_stable_variance(alpha, t)
    mean = q1 * ey
    var = q2 * ey + q1**2 * vy
    cov = q2 * inverse_stable_mean(alpha, s) + q1**2 * inverse_stable_cov(alpha, s, t)
    var_s = float(q2 * inverse_stable_mean(alpha, s) + q1**2 * (0.0 if alpha == 1 else inverse_stable_variance(alpha, s)))
    return MfaMoments(mean, var, cov, q1, q2, var_s)


def lrd_constant(f: BernsteinFn, p: GcpParams, alpha: float, s: float) -> float:
    """c(s) in Corr(s, t) ~ c(s) t^-alpha."""
    q1, q2 = count_moments_unit(f, p)
    g1, g2 = math.gamma(1 + alpha), math.gamma(1 + 2 * alpha)
    var_s = q2 * s**alpha / g1 + q1**2 * (2 / g2 - 1 / g1**2) * s ** (2 * alpha)
    num = q2 * s**alpha / g1 + q1**2 * s ** (2 * alpha) / g2
    return num / (math.sqrt(var_s) * q1 * math.sqrt(2 / g2 - 1 / g1**2))


# ---------------------------------------------------------------------------
# joint sampling on a set of times


def inverse_stable_joint(alpha: float, times, rng: np.random.Generator, size: int,
                         rel_step: float = 0.01, min_step: float | None = None) -> np.ndarray:
    """Draws of (Y(t_1), ..., Y(t_m)) along common stable paths, shape (size, m).

    The stable subordinator is stepped on a graded grid x_{i+1} = x_i +
    max(min_step, rel_step x_i) and Y(t) is the first grid point where the
    path exceeds t, so each draw is high by less than one local step.
    """
    if not 0 < alpha < 1:
        raise ParameterError("joint sampling needs an index in (0,1)")
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] <= 0:
        raise ParameterError("times must be positive and increasing")
    if min_step is None:
        min_step = 1e-3 * times[0] ** alpha
    out = np.full((size, times.size), np.nan)
    x = 0.0
    d = np.zeros(size)
    nxt = np.zeros(size, dtype=int)  # index of the next time not yet crossed
    live = np.arange(size)
    steps = 0
    while live.size:
        h = max(min_step, rel_step * x)
        d[live] += h ** (1 / alpha) * standard_stable(alpha, rng, live.size)
        x += h
        steps += 1
        if steps > 10**6:
            raise EvaluationError("inverse stable path did not reach the last time")
        dl = d[live]
        for _ in range(times.size):
            idx = nxt[live]
            crossed = (idx < times.size) & (dl > times[np.minimum(idx, times.size - 1)])
            if not crossed.any():
                break
            rows = live[crossed]
            out[rows, idx[crossed]] = x
            nxt[rows] += 1
        live = live[nxt[live] < times.size]
    return out


def mfa_sample_joint(f: BernsteinFn, p: GcpParams, alpha: float, times, rng: np.random.Generator,
                     size: int, rel_step: float = 0.01) -> np.ndarray:
    """Joint draws of M(D_f(Y_alpha(t_i))) over increasing times, shape (size, m)."""
    times = np.asarray(times, dtype=float)
    if alpha == 1:
        y = np.broadcast_to(times, (size, times.size)).copy()
    else:
        y = inverse_stable_joint(alpha, times, rng, size, rel_step)
    dy = np.diff(np.concatenate([np.zeros((size, 1)), y], axis=1), axis=1)
    counts = np.zeros((size, times.size), dtype=np.int64)
    total = np.zeros(size, dtype=np.int64)
    for i in range(times.size):
        step = dy[:, i]
        dd = np.zeros(size)
        pos = step > 0
        if pos.any():
            dd[pos] = f.sample(step[pos], rng)
        total = total + gcp_sample_counts(p, dd, size, rng)
        counts[:, i] = total
    return counts


@dataclass
class LrdEstimate:
    s: float
    t_grid: np.ndarray
    analytic_corr: np.ndarray
    analytic_slope: float
    mc_corr: np.ndarray | None = None
    mc_slope: float | None = None
    n_paths: int = 0
    fit_window: tuple[float, float] = (0.0, 0.0)


def _slope(t: np.ndarray, c: np.ndarray) -> float:
    if np.any(c <= 0):
        raise EvaluationError("correlation estimate is not positive; slope undefined")
    return float(np.polyfit(np.log(t), np.log(c), 1)[0])


def lrd_estimate(f: BernsteinFn, p: GcpParams, alpha: float, s: float, t_grid,
                 n_paths: int = 0, rng: np.random.Generator | None = None) -> LrdEstimate:
    """Log-log slope of Corr(M(s), M(t)) against t.

    The analytic slope is fitted over the last decade of ``t_grid``; the
    Monte Carlo slope (when ``n_paths`` > 0) over the whole grid.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.size < 2 or math.log10(t[-1] / t[0]) < 1.5:
        raise ParameterError("the time grid must span at least 1.5 decades")
    if np.any(t <= s):
        raise ParameterError("grid times must exceed s")
    mom = mfa_moments(f, p, alpha, s, t)
    if not (mom.var_s > 0 and np.all(mom.var > 0)):
        raise EvaluationError("degenerate variance")
    corr = mom.corr
    last = t >= t[-1] / 10
    est = LrdEstimate(s, t, corr, _slope(t[last], corr[last]), fit_window=(float(t[last][0]), float(t[-1])))
    if n_paths:
        rng = rng if rng is not None else np.random.default_rng()
        x = mfa_sample_joint(f, p, alpha, np.concatenate([[s], t]), rng, n_paths).astype(float)
        xc = x - x.mean(axis=0)
        sd = xc.std(axis=0)
        if np.any(sd == 0):
            raise EvaluationError("degenerate sample variance")
        mc = (xc[:, 1:] * xc[:, :1]).mean(axis=0) / (sd[0] * sd[1:])
        est.mc_corr = mc
        est.mc_slope = _slope(t, mc)
        est.n_paths = n_paths
    return est
