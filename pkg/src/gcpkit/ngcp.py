"""Non-homogeneous GCP: jumps of size j arrive at a time-dependent rate lam_j(t).

An increment M(t+v) - M(v) has the law of a homogeneous GCP observed at
time 1 with rates Lambda_j(v, t+v), the integrated rates over the window,
so the pmf code reuses the compound machinery of ``gcp_core``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import EvaluationError, ParameterError
from .gcp_core import (SamplePath, TruncatedPmf, certified, choose_n_max,
                       compound_pmf, compound_tails)
from .combin import convolution_powers

QUAD_TOL = 1e-10


@dataclass(frozen=True)
class RateFunction:
    """One nonnegative rate function, either a built-in family or a callable."""

    family: str
    params: tuple[float, ...] = ()
    fn: Callable | None = field(default=None, compare=False, repr=False)
    cumulative_fn: Callable | None = field(default=None, compare=False, repr=False)
    sup_fn: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        p = self.params
        fam = self.family
        if fam == "constant":
            ok = len(p) == 1 and p[0] >= 0
        elif fam == "linear":
            ok = len(p) == 2 and p[0] >= 0 and p[1] >= 0
        elif fam == "power":
            ok = len(p) == 2 and p[0] >= 0 and p[1] >= 0
        elif fam == "sin":
            ok = len(p) == 3 and p[2] >= abs(p[0]) and p[1] != 0
        elif fam == "custom":
            ok = self.fn is not None
        else:
            raise ParameterError(f"unknown rate family {fam!r}")
        if not ok:
            raise ParameterError(f"invalid parameters {p} for rate family {fam!r}")

    @classmethod
    def parse(cls, text: str) -> "RateFunction":
        """Grammar: ``constant:c``, ``linear:a[,b]`` (a t + b), ``power:a,g`` (a t^g),
        ``sin:a,w,c`` (c + a sin(w t), needs c >= |a|)."""
        name, _, rest = text.strip().partition(":")
        name = {"sinusoidal": "sin", "const": "constant"}.get(name.strip(), name.strip())
        try:
            vals = tuple(float(v) for v in rest.split(",") if v.strip())
        except ValueError as exc:
            raise ParameterError(f"cannot parse rate {text!r}") from exc
        if name == "linear" and len(vals) == 1:
            vals = (vals[0], 0.0)
        return cls(name, vals)

    @classmethod
    def custom(cls, fn: Callable, cumulative: Callable | None = None,
               sup: Callable | None = None) -> "RateFunction":
        return cls("custom", (), fn, cumulative, sup)

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.family == "constant":
            out = np.full_like(t, p[0])
        elif self.family == "linear":
            out = p[0] * t + p[1]
        elif self.family == "power":
            out = p[0] * t ** p[1]
        elif self.family == "sin":
            out = p[2] + p[0] * np.sin(p[1] * t)
        else:
            out = np.vectorize(lambda s: float(self.fn(s)))(t)
        return float(out) if out.ndim == 0 else out

    def cumulative(self, t: float) -> float:
        """Lambda_j(t) = int_0^t lam_j."""
        if t < 0:
            raise ParameterError("t must be nonnegative")
        if math.isinf(t):
            if self.family == "constant" and self.params[0] == 0:
                return 0.0
            if self.family in ("linear", "power") and self.params[0] == 0:
                return 0.0 if self.family == "power" or self.params[1] == 0 else math.inf
            if self.family == "custom":
                return self._quad(0.0, math.inf)
            return math.inf
        p = self.params
        if self.family == "constant":
            return p[0] * t
        if self.family == "linear":
            return 0.5 * p[0] * t * t + p[1] * t
        if self.family == "power":
            return p[0] * t ** (p[1] + 1) / (p[1] + 1)
        if self.family == "sin":
            return p[2] * t + p[0] * (1.0 - math.cos(p[1] * t)) / p[1]
        if self.cumulative_fn is not None:
            return float(self.cumulative_fn(t))
        return self._quad(0.0, t)

    def cumulative_many(self, ts) -> np.ndarray:
        """Vectorized cumulative rate for an array of finite times."""
        ts = np.asarray(ts, dtype=float)
        p = self.params
        if self.family == "constant":
            return p[0] * ts
        if self.family == "linear":
            return 0.5 * p[0] * ts * ts + p[1] * ts
        if self.family == "power":
            return p[0] * ts ** (p[1] + 1) / (p[1] + 1)
        if self.family == "sin":
            return p[2] * ts + p[0] * (1.0 - np.cos(p[1] * ts)) / p[1]
        return np.array([self.cumulative(float(x)) for x in ts.ravel()]).reshape(ts.shape)

    def _quad(self, a: float, b: float) -> float:
        val, err = integrate.quad(lambda s: float(self.fn(s)), a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
        if not np.isfinite(val) or err > 1e3 * QUAD_TOL * max(1.0, abs(val)):
            raise EvaluationError(f"cumulative rate quadrature failed on [{a}, {b}] (error {err:.2g})")
        return val

    def sup_bound(self, T: float) -> float:
        """Upper bound of the rate on [0, T], used for thinning."""
        p = self.params
        if self.family == "constant":
            return p[0]
        if self.family == "linear":
            return p[0] * T + p[1]
        if self.family == "power":
            return p[0] * T ** p[1] if p[1] > 0 else p[0]
        if self.family == "sin":
            return p[2] + abs(p[0])
        if self.sup_fn is None:
            raise ParameterError("custom rate functions need a declared sup bound for thinning")
        return float(self.sup_fn(T))


@dataclass(frozen=True)
class RateFunctionSet:
    rates: tuple[RateFunction, ...]

    def __post_init__(self):
        if not self.rates:
            raise ParameterError("at least one rate function is required")

    @classmethod
    def parse(cls, specs: Sequence[str]) -> "RateFunctionSet":
        return cls(tuple(RateFunction.parse(s) for s in specs))

    @classmethod
    def constant(cls, lam: Sequence[float]) -> "RateFunctionSet":
        return cls(tuple(RateFunction("constant", (float(x),)) for x in lam))

    @property
    def k(self) -> int:
        return len(self.rates)

    def rate(self, t) -> np.ndarray:
        """Array of shape (k,) + shape(t)."""
        return np.array([r.rate(t) for r in self.rates])

    def cumulative(self, t: float) -> np.ndarray:
        return np.array([r.cumulative(t) for r in self.rates])

    def window(self, t: float, v: float) -> np.ndarray:
        """Lambda_j(v, v + t) for each j."""
        if t < 0 or v < 0:
            raise ParameterError("t and v must be nonnegative")
        hi = self.cumulative(v + t)
        lo = self.cumulative(v)
        return np.maximum(hi - lo, 0.0)

    def window_many(self, ts, v: float) -> np.ndarray:
        """Lambda_j(v, v + t) for an array of t; shape ts.shape + (k,)."""
        ts = np.asarray(ts, dtype=float)
        if np.any(ts < 0) or v < 0:
            raise ParameterError("t and v must be nonnegative")
        cols = [r.cumulative_many(v + ts) - r.cumulative(v) for r in self.rates]
        return np.maximum(np.stack(cols, axis=-1), 0.0)

    def sup_bounds(self, T: float) -> np.ndarray:
        return np.array([r.sup_bound(T) for r in self.rates])


def _window_law(means: np.ndarray):
    total = float(means.sum())
    probs = means / total if total > 0 else np.zeros_like(means)
    return probs, total


def pmf_from_window(means: np.ndarray, n_max: int | None = None) -> TruncatedPmf:
    """pmf of sum_j j * Poisson(means_j) with exact tail mass."""
    probs, total = _window_law(np.asarray(means, dtype=float))
    if total == 0:
        n_max = n_max or 0
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return TruncatedPmf(out, certified(0.0), method="compound")
    if n_max is None:
        n_max = choose_n_max(probs, total)
    q = convolution_powers(probs, n_max)
    pm = compound_pmf(probs, total, n_max, q)
    tail = compound_tails(probs, total, n_max, q)[-1]
    return TruncatedPmf(pm, certified(tail), method="compound")


def ngcp_increment_pmf(r: RateFunctionSet, t: float, v: float = 0.0,
                       n_max: int | None = None) -> TruncatedPmf:
    return pmf_from_window(r.window(t, v), n_max)


def ngcp_char_fn(r: RateFunctionSet, t: float, v: float, xi):
    means = r.window(t, v)
    xi = np.asarray(xi, dtype=float)
    expo = sum(m * (np.exp(1j * xi * j) - 1.0) for j, m in enumerate(means, start=1))
    out = np.exp(expo)
    return complex(out) if out.ndim == 0 else out


def ngcp_pgf(r: RateFunctionSet, t: float, u):
    u_arr = np.asarray(u, dtype=float)
    if np.any(np.abs(u_arr) > 1):
        raise ParameterError("pgf argument must satisfy |u| <= 1")
    means = r.cumulative(t)
    out = np.exp(sum(m * (u_arr**j - 1.0) for j, m in enumerate(means, start=1)))
    return float(out) if out.ndim == 0 else out


def ngcp_moments(r: RateFunctionSet, t: float, v: float = 0.0) -> tuple[float, float]:
    means = r.window(t, v)
    j = np.arange(1, r.k + 1)
    return float(np.dot(j, means)), float(np.dot(j**2, means))


def ngcp_sample(r: RateFunctionSet, T: float, rng: np.random.Generator) -> SamplePath:
    """Superpose k thinned streams; stream j carries jumps of size j."""
    if T <= 0:
        raise ParameterError("horizon must be positive")
    bounds = r.sup_bounds(T)
    times, sizes = [], []
    for j, (rf, bound) in enumerate(zip(r.rates, bounds), start=1):
        if bound <= 0:
            continue
        n = rng.poisson(bound * T)
        cand = np.sort(rng.uniform(0.0, T, n))
        lam = np.atleast_1d(rf.rate(cand))
        if np.any(lam > bound * (1 + 1e-12)):
            raise ParameterError(f"rate {j} exceeds its declared sup bound on [0, {T}]")
        keep = rng.random(n) * bound < lam
        times.append(cand[keep])
        sizes.append(np.full(int(keep.sum()), j))
    if not times:
        return SamplePath(np.zeros(0), np.zeros(0, dtype=np.int64), T)
    ev = np.concatenate(times)
    sz = np.concatenate(sizes)
    order = np.argsort(ev, kind="stable")
    return SamplePath(ev[order], sz[order], T)


def ngcp_sample_counts(r: RateFunctionSet, t_grid, n_paths: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Counts at each grid time for many paths, shape (n_paths, len(t_grid)).

    Increments over grid cells are independent with Poisson(Lambda_j) jump
    counts, which gives the exact joint law on the grid.
    """
    t = np.asarray(t_grid, dtype=float)
    edges = np.concatenate([[0.0], t])
    cum = np.array([r.cumulative(s) for s in edges])
    inc = np.maximum(np.diff(cum, axis=0), 0.0)
    out = np.zeros((n_paths, t.size), dtype=np.int64)
    for j in range(r.k):
        out += (j + 1) * rng.poisson(inc[:, j], size=(n_paths, t.size))
    return np.cumsum(out, axis=1)


def ngcp_arrival_cdf(r: RateFunctionSet, n: int, t: float) -> float:
    """Pr(n-th unit of count has arrived by t) = 1 - Pr(M(t) < n), clamped to [0, 1]."""
    if n < 1:
        raise ParameterError("n must be at least 1")
    if t == 0:
        return 0.0
    pm = pmf_from_window(r.window(t, 0.0), n_max=n - 1)
    return float(min(1.0, max(0.0, 1.0 - math.fsum(pm.probs[:n]))))


def ngcp_arrival_mass(r: RateFunctionSet, n: int) -> float:
    """Total mass of the arrival-time law, which is below one when the rates are integrable."""
    means = np.array([rf.cumulative(math.inf) for rf in r.rates])
    if np.any(np.isinf(means)):
        return 1.0
    pm = pmf_from_window(means, n_max=n - 1)
    return float(min(1.0, max(0.0, 1.0 - math.fsum(pm.probs[:n]))))


def ngcp_compensator(path: SamplePath, r: RateFunctionSet, grid) -> np.ndarray:
    """M(t) - sum_j j Lambda_j(t) on the grid."""
    grid = np.asarray(grid, dtype=float)
    j = np.arange(1, r.k + 1)
    drift = np.array([np.dot(j, r.cumulative(s)) for s in grid])
    return path.value(grid) - drift


def ngcp_governing_residual(r: RateFunctionSet, t_grid, n_max: int, h: float = 1e-4) -> float:
    """Max over the grid of |dq/dt - generator applied to q| with central differences."""
    worst = 0.0
    for t in np.asarray(t_grid, dtype=float):
        qp = ngcp_increment_pmf(r, t + h, 0.0, n_max).probs
        qm = ngcp_increment_pmf(r, t - h, 0.0, n_max).probs
        q = ngcp_increment_pmf(r, t, 0.0, n_max).probs
        lam = r.rate(t)
        rhs = -lam.sum() * q
        for j, lj in enumerate(lam, start=1):
            rhs[j:] += lj * q[:-j]
        worst = max(worst, float(np.max(np.abs((qp - qm) / (2 * h) - rhs))))
    return worst
