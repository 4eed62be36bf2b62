"""Bernstein functions, subordinator samplers and inverse subordinators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import EvaluationError, InfiniteMomentError, ParameterError
from .specfun import _kanter_a, m_wright, m_wright_many

MAX_CUSTOM_ORDER = 60
_CONTOUR_POINTS = 512
_CONTOUR_RADIUS = 0.9


def fornberg_weights(order: int, offsets: np.ndarray) -> np.ndarray:
    """Finite-difference weights for the derivative of given order at 0."""
    x = np.asarray(offsets, dtype=float)
    n = x.size
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, x[0]
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def _fd_derivative(func, m: int, s: float) -> float:
    """Central differences accurate to order 8, then one Richardson step."""
    npts = m + 8 + ((m + 8) % 2 == 0)
    half = npts // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    h = min(0.05 * max(s, 1e-3) * 8 / (m + 8), 0.9 * s / half)

    def approx(step):
        w = fornberg_weights(m, offsets)
        vals = np.array([float(func(s + o * step)) for o in offsets])
        return float(np.dot(w, vals)) / step**m

    d1, d2 = approx(h), approx(h / 2)
    return (256.0 * d2 - d1) / 255.0


def _accepts_complex(func, s: float) -> bool:
    try:
        z = complex(s, 0.25 * s)
        v = func(z)
        v = complex(np.asarray(v).item())
        re = float(np.real(np.asarray(func(complex(s, 0.0))).item()))
    except (TypeError, ValueError, AttributeError):
        return False
    return bool(np.isfinite(v.real) and np.isfinite(v.imag) and abs(v.imag) > 0
                and np.isclose(re, float(func(s)), rtol=1e-12, atol=1e-300))


def _contour_taylor(func, s: float, m_max: int) -> np.ndarray:
    """Taylor coefficients f^{(m)}(s)/m! for m=0..m_max from a circle of radius 0.9 s."""
    r = _CONTOUR_RADIUS * s
    theta = 2 * np.pi * np.arange(_CONTOUR_POINTS) / _CONTOUR_POINTS
    vals = np.array([complex(np.asarray(func(s + r * np.exp(1j * th))).item()) for th in theta])
    coef = np.fft.fft(vals) / _CONTOUR_POINTS
    m = np.arange(m_max + 1)
    return (coef[: m_max + 1] / r**m).real


@dataclass(frozen=True)
class BernsteinFn:
    """A Bernstein function f with f(0)=0 and no drift or killing."""

    family: str
    beta: float | None = None
    a: float | None = None
    b: float | None = None
    func: Callable | None = field(default=None, compare=False, repr=False)
    label: str = ""
    custom_mean: float | None = None
    custom_variance: float | None = None

    @classmethod
    def stable(cls, beta: float) -> "BernsteinFn":
        if not 0 < beta < 1:
            raise ParameterError(f"stable index must lie in (0,1), got {beta}")
        return cls("stable", beta=float(beta))

    @classmethod
    def gamma(cls, a: float, b: float) -> "BernsteinFn":
        if not (a > 0 and b > 0):
            raise ParameterError("gamma subordinator needs a > 0 and b > 0")
        return cls("gamma", a=float(a), b=float(b))

    @classmethod
    def custom(cls, func: Callable, label: str = "custom", mean: float | None = None,
               variance: float | None = None) -> "BernsteinFn":
        return cls("custom", func=func, label=label, custom_mean=mean, custom_variance=variance)

    @classmethod
    def parse(cls, text: str) -> "BernsteinFn":
        """Parse ``gamma:a=1,b=2`` or ``stable:beta=0.7``; positional values also work."""
        name, _, rest = text.strip().partition(":")
        name = name.strip().lower()
        kw: dict[str, float] = {}
        pos: list[float] = []
        try:
            for item in filter(None, (p.strip() for p in rest.split(","))):
                if "=" in item:
                    key, val = item.split("=", 1)
                    kw[key.strip()] = float(val)
                else:
                    pos.append(float(item))
        except ValueError as exc:
            raise ParameterError(f"cannot parse Bernstein function {text!r}") from exc
        if name == "stable":
            beta = kw.get("beta", pos[0] if pos else None)
            if beta is None:
                raise ParameterError("stable family needs beta")
            return cls.stable(beta)
        if name == "gamma":
            vals = {"a": kw.get("a"), "b": kw.get("b")}
            for key, v in zip(("a", "b"), pos):
                vals[key] = v if vals[key] is None else vals[key]
            if None in vals.values():
                raise ParameterError("gamma family needs a and b")
            return cls.gamma(vals["a"], vals["b"])
        raise ParameterError(f"unknown Bernstein family {name!r}")

    def describe(self) -> str:
        if self.family == "stable":
            return f"stable:beta={self.beta!r}"
        if self.family == "gamma":
            return f"gamma:a={self.a!r},b={self.b!r}"
        return f"custom:{self.label}"

    # evaluation -----------------------------------------------------------

    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < 0):
            raise ParameterError("Bernstein functions are evaluated at s >= 0")
        if self.family == "stable":
            out = s_arr**self.beta
        elif self.family == "gamma":
            out = self.b * np.log1p(s_arr / self.a)
        else:
            out = np.vectorize(lambda v: float(np.real(self.func(v))))(s_arr)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def approximate(self) -> bool:
        """True when derivatives come from finite differences."""
        return self.family == "custom" and not _accepts_complex(self.func, 1.0)

    def deriv(self, m: int, s: float) -> float:
        """m-th derivative at s > 0."""
        if m < 0 or int(m) != m:
            raise ParameterError("derivative order must be a nonnegative integer")
        if m == 0:
            return float(self(s))
        if s <= 0:
            raise ParameterError("derivatives are evaluated at s > 0")
        if self.family == "stable":
            fall = 1.0
            for i in range(m):
                fall *= self.beta - i
            return fall * s ** (self.beta - m)
        if self.family == "gamma":
            return self.b * (-1) ** (m - 1) * math.exp(gammaln(m) - m * math.log(self.a + s))
        if m > MAX_CUSTOM_ORDER:
            raise ParameterError(f"custom derivatives are limited to order {MAX_CUSTOM_ORDER}")
        if _accepts_complex(self.func, s):
            return float(_contour_taylor(self.func, s, m)[m] * math.exp(gammaln(m + 1)))
        return _fd_derivative(lambda v: float(self(v)), m, s)

    def alt_deriv(self, m: int, s: float) -> float:
        """(-1)^(m+1) f^(m)(s), which is nonnegative for m >= 1."""
        return (-1) ** (m + 1) * self.deriv(m, s)

    def poisson_jump_rates(self, lam: float, n_max: int) -> np.ndarray:
        """Jump rates of a rate-lam Poisson process run on the clock D_f.

        Entry i is (-1)^(i+1) f^(i)(lam) lam^i / i!, the rate of jumps of size
        i; entry 0 is zero.  These rates sum to f(lam).
        """
        out = np.zeros(n_max + 1)
        if n_max == 0:
            return out
        i = np.arange(1, n_max + 1, dtype=float)
        if self.family == "stable":
            ratio = np.concatenate([[self.beta], (i[1:] - 1 - self.beta) / i[1:]])
            out[1:] = lam**self.beta * np.cumprod(ratio)
        elif self.family == "gamma":
            q = lam / (self.a + lam)
            out[1:] = self.b * np.exp(i * math.log(q)) / i
        else:
            if n_max > MAX_CUSTOM_ORDER:
                raise ParameterError(f"custom derivatives are limited to order {MAX_CUSTOM_ORDER}")
            if _accepts_complex(self.func, lam):
                coef = _contour_taylor(self.func, lam, n_max)
                out[1:] = (-1) ** (i + 1) * coef[1:] * lam**i
            else:
                out[1:] = [self.alt_deriv(int(m), lam) * math.exp(m * math.log(lam) - gammaln(m + 1)) for m in i]
        return out

    def poisson_jump_tail(self, lam: float, m: int) -> float:
        """Sum of ``poisson_jump_rates`` over sizes strictly above m."""
        if self.family == "stable":
            return math.exp(self.beta * math.log(lam) + gammaln(m + 1 - self.beta)
                            - gammaln(1 - self.beta) - gammaln(m + 1))
        if self.family == "gamma":
            q = lam / (self.a + lam)
            if q < 0.999:
                n_terms = int(math.ceil(-40.0 / math.log(q))) + 1
                i = np.arange(m + 1, m + 1 + n_terms, dtype=float)
                return float(self.b * np.sum(np.exp(i * math.log(q)) / i))
            import mpmath

            return float(self.b * q ** (m + 1) * mpmath.lerchphi(q, 1, m + 1))
        rates = self.poisson_jump_rates(lam, m)
        return max(float(self(lam)) - math.fsum(rates), 0.0)

    # moments and sampling --------------------------------------------------

    def mean(self, t: float = 1.0) -> float:
        if self.family == "gamma":
            return t * self.b / self.a
        if self.family == "stable":
            raise InfiniteMomentError("stable subordinators have infinite mean")
        if self.custom_mean is None:
            raise InfiniteMomentError("mean of a custom subordinator was not declared")
        return t * self.custom_mean

    def variance(self, t: float = 1.0) -> float:
        if self.family == "gamma":
            return t * self.b / self.a**2
        if self.family == "stable":
            raise InfiniteMomentError("stable subordinators have infinite variance")
        if self.custom_variance is None:
            raise InfiniteMomentError("variance of a custom subordinator was not declared")
        return t * self.custom_variance

    def sample(self, dt, rng: np.random.Generator, size=None):
        """Draws of D_f(dt)."""
        if self.family == "stable":
            return stable_increment(self.beta, dt, rng, size)
        if self.family == "gamma":
            return gamma_increment(self.a, self.b, dt, rng, size)
        raise ParameterError("custom Bernstein functions have no increment sampler")


def bernstein_eval(f: BernsteinFn, s):
    return f(s)


def bernstein_deriv(f: BernsteinFn, m: int, s: float) -> float:
    return f.deriv(m, s)


# ---------------------------------------------------------------------------
# samplers


def standard_stable(beta: float, rng: np.random.Generator, size=None):
    """Positive stable S with E exp(-s S) = exp(-s^beta), by Kanter's representation."""
    u = np.pi * rng.random(size)
    e = rng.exponential(1.0, size)
    a = _kanter_a(u, beta)
    return (a / e) ** ((1.0 - beta) / beta)


def stable_increment(beta: float, dt, rng: np.random.Generator, size=None):
    if not 0 < beta < 1:
        raise ParameterError(f"stable index must lie in (0,1), got {beta}")
    if np.any(np.asarray(dt) <= 0):
        raise ParameterError("time step must be positive")
    dt = np.asarray(dt, dtype=float)
    if size is None and dt.ndim:
        size = dt.shape  # one independent draw per time step
    return dt ** (1.0 / beta) * standard_stable(beta, rng, size)


def gamma_increment(a: float, b: float, dt, rng: np.random.Generator, size=None):
    if not (a > 0 and b > 0):
        raise ParameterError("gamma subordinator needs a > 0 and b > 0")
    if np.any(np.asarray(dt) <= 0):
        raise ParameterError("time step must be positive")
    return rng.gamma(b * np.asarray(dt), 1.0 / a, size)


def inverse_stable_marginal(alpha: float, t, rng: np.random.Generator, size=None):
    """Exact draws of Y_alpha(t) = (t / S)^alpha."""
    if not 0 < alpha < 1:
        raise ParameterError(f"index must lie in (0,1), got {alpha}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterError("t must be nonnegative")
    if size is None and t.ndim:
        size = t.shape
    s = standard_stable(alpha, rng, size)
    return (t / s) ** alpha


def inverse_stable_density(alpha: float, t: float, x):
    """Density of Y_alpha(t) at x >= 0: t^-alpha M_alpha(x t^-alpha)."""
    if t <= 0:
        raise ParameterError("t must be positive")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise ParameterError("x must be nonnegative")
    scale = t ** (-alpha)
    if x_arr.ndim == 0:
        return scale * float(m_wright(alpha, float(x_arr) * scale))
    return scale * m_wright_many(alpha, x_arr * scale)


# ---------------------------------------------------------------------------
# paths


@dataclass
class SubordinatorPath:
    times: np.ndarray
    values: np.ndarray
    dt: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)

    def value(self, t):
        """Left-grid evaluation D(t_i) with t_i the last grid time <= t."""
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.values[np.clip(idx, 0, None)]


def subordinator_path(f: BernsteinFn, T: float, dt: float | None,
                      rng: np.random.Generator) -> SubordinatorPath:
    if T <= 0:
        raise ParameterError("horizon must be positive")
    dt = dt or 1e-3 * T
    n = int(math.ceil(T / dt - 1e-9))
    inc = f.sample(dt, rng, n)
    times = dt * np.arange(n + 1)
    return SubordinatorPath(times, np.concatenate([[0.0], np.cumsum(inc)]), dt)


def inverse_path(path: SubordinatorPath, t_grid) -> SubordinatorPath:
    """Generalized inverse Y(t) = inf{x : D(x) > t} on t_grid.

    The crossing grid cell is located by binary search; inside it the path
    is interpolated linearly, which is exact for linear paths and within
    one cell otherwise.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.size and t.max() >= path.values[-1]:
        raise ParameterError(
            f"path reaches only {path.values[-1]:.4g}; simulate a longer horizon to invert up to {t.max():.4g}")
    i = np.searchsorted(path.values, t, side="right")
    hi = path.values[i]
    lo = path.values[np.maximum(i - 1, 0)]
    x0 = path.times[np.maximum(i - 1, 0)]
    x1 = path.times[i]
    gap = np.where(hi > lo, hi - lo, 1.0)
    frac = np.clip((t - lo) / gap, 0.0, 1.0)
    y = np.where(i == 0, 0.0, x0 + frac * (x1 - x0))
    dt = float(np.min(np.diff(t))) if t.size > 1 else path.dt
    return SubordinatorPath(t, np.maximum.accumulate(y) if y.size else y, dt)


# ---------------------------------------------------------------------------
# quadrature against the inverse stable density


@dataclass(frozen=True)
class InverseStableQuadrature:
    """Rule for E g(Y_alpha(t)) = int g(t^alpha w) M_alpha(w) dw.

    Composite Gauss-Legendre on [0, w_max] with the M-Wright weight folded
    into the weights; w_max is where M_alpha(w) w^12 drops below 1e-19.
    """

    alpha: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def expect(self, g: Callable, t: float):
        """Weighted sum over nodes of g(t^alpha w); g must accept an array of times."""
        u = t**self.alpha * self.nodes
        vals = np.asarray(g(u))
        return np.tensordot(self.weights, vals, axes=(0, 0))

    def moment_error(self, n: int) -> float:
        exact = math.exp(gammaln(n + 1) - gammaln(1 + n * self.alpha))
        return abs(float(np.dot(self.weights, self.nodes**n)) - exact) / exact


@lru_cache(maxsize=64)
def inverse_stable_rule(alpha: float, panels: int = 80, order: int = 16) -> InverseStableQuadrature:
    if not 0 < alpha < 1:
        raise ParameterError(f"index must lie in (0,1), got {alpha}")
    grid = np.concatenate([np.linspace(1.0, 20.0, 20), np.linspace(25.0, 400.0, 76)])
    vals = m_wright_many(alpha, grid) * grid**12
    peak = int(np.argmax(vals))
    below = np.nonzero((vals < 1e-19) & (np.arange(grid.size) > peak))[0]
    if not below.size:
        raise EvaluationError("M-Wright tail does not decay within the scanned range")
    w_max = float(grid[below[0]])
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, w_max, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = ((b - a) / 2 * x + (a + b) / 2).ravel()
    weights = ((b - a) / 2 * w).ravel() * m_wright_many(alpha, nodes)
    return InverseStableQuadrature(float(alpha), nodes, weights)


# ---------------------------------------------------------------------------
# multistable


BETA_STEP_LIMIT = 0.01


@dataclass(frozen=True)
class StabilityProfile:
    """Time-varying stability index beta(t), assumed continuous with values in (0, 1)."""

    beta_fn: Callable = field(compare=False)
    label: str = ""
    slope: float | None = None

    @classmethod
    def constant(cls, beta: float) -> "StabilityProfile":
        return cls(lambda t, b=float(beta): np.full_like(np.asarray(t, dtype=float), b),
                   f"constant:{beta!r}", 0.0)

    @classmethod
    def linear(cls, b0: float, b1: float) -> "StabilityProfile":
        return cls(lambda t, b0=float(b0), b1=float(b1): b0 + b1 * np.asarray(t, dtype=float),
                   f"linear:{b0!r},{b1!r}", float(b1))

    @classmethod
    def parse(cls, text: str) -> "StabilityProfile":
        name, _, rest = text.strip().partition(":")
        try:
            vals = [float(v) for v in rest.split(",") if v.strip()]
        except ValueError as exc:
            raise ParameterError(f"cannot parse stability profile {text!r}") from exc
        if name == "constant" and len(vals) == 1:
            return cls.constant(vals[0])
        if name == "linear" and len(vals) == 2:
            return cls.linear(*vals)
        raise ParameterError(f"unknown stability profile {text!r}")

    def __call__(self, t):
        return self.beta_fn(t)

    def validate(self, T: float, n_check: int = 2001) -> None:
        grid = np.linspace(0.0, T, n_check)
        b = np.asarray(self(grid), dtype=float)
        if not np.all(np.isfinite(b)) or b.min() <= 0 or b.max() >= 1:
            raise ParameterError(f"stability index leaves (0,1) on [0,{T}]")

    def slice_variation(self, T: float, dt: float) -> float:
        if self.slope is not None:
            return abs(self.slope) * dt
        fine = np.linspace(0.0, T, max(2001, int(20 * T / dt) + 1))
        b = np.asarray(self(fine))
        per = max(1, int(round(dt / (fine[1] - fine[0]))))
        return float(max(np.ptp(b[i:i + per + 1]) for i in range(0, len(b) - 1, per)))

    def power_integral(self, u: float, t: float) -> float:
        """int_0^t u^beta(tau) dtau."""
        if u == 0:
            return 0.0
        val, _ = integrate.quad(lambda s: u ** float(self(s)), 0.0, t, epsabs=0, epsrel=1e-13, limit=200)
        return val

    def poisson_jump_rates(self, lam: float, n_max: int, t: float) -> np.ndarray:
        """int_0^t |binom(beta(tau), i)| lam^beta(tau) dtau for i = 0..n_max (entry 0 is 0)."""
        i = np.arange(1, n_max + 1, dtype=float)

        def integrand(s):
            b = float(self(s))
            ratio = np.concatenate([[b], (i[1:] - 1 - b) / i[1:]])
            return np.concatenate([[0.0], lam**b * np.cumprod(ratio)])

        val, _ = integrate.quad_vec(integrand, 0.0, t, epsabs=0, epsrel=1e-12)
        return val


def _slice_width(profile: StabilityProfile, T: float, dt: float) -> float:
    while profile.slice_variation(T, dt) >= BETA_STEP_LIMIT:
        dt /= 2
        if dt < 1e-7 * T:
            raise ParameterError("stability index varies too quickly to slice")
    return dt


def multistable_path(profile: StabilityProfile, T: float, dt: float | None,
                     rng: np.random.Generator) -> SubordinatorPath:
    """Slice construction: [t_i, t_i + dt) contributes a stable(beta(t_i)) increment."""
    profile.validate(T)
    dt = _slice_width(profile, T, dt or 1e-3 * T)
    n = int(math.ceil(T / dt - 1e-9))
    times = dt * np.arange(n + 1)
    betas = np.asarray(profile(times[:-1]), dtype=float)
    steps = np.minimum(dt, T - times[:-1])
    inc = np.array([stable_increment(b, h, rng) for b, h in zip(betas, steps)])
    return SubordinatorPath(np.minimum(times, T), np.concatenate([[0.0], np.cumsum(inc)]), dt)


def multistable_terminal(profile: StabilityProfile, T: float, dt: float | None,
                         rng: np.random.Generator, size: int) -> tuple[np.ndarray, float]:
    """Draws of H(T) from the slice construction, with the slice width used."""
    profile.validate(T)
    dt = _slice_width(profile, T, dt or 1e-3 * T)
    n = int(math.ceil(T / dt - 1e-9))
    starts = dt * np.arange(n)
    total = np.zeros(size)
    for t0, b in zip(starts, np.asarray(profile(starts), dtype=float)):
        total += stable_increment(b, min(dt, T - t0), rng, size)
    return total, dt


def slice_power_integral(profile: StabilityProfile, u: float, T: float, dt: float) -> float:
    """The Laplace exponent actually simulated: sum over slices of h_i u^beta(t_i)."""
    n = int(math.ceil(T / dt - 1e-9))
    starts = dt * np.arange(n)
    steps = np.minimum(dt, T - starts)
    return float(np.sum(steps * u ** np.asarray(profile(starts), dtype=float)))
