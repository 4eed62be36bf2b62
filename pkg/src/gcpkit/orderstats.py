"""Time-fractional negative binomial process and order statistics of random-size samples.

For a sample X_1..X_Q of iid draws with CDF F and an independent random
size Q, the k-th order statistic satisfies X_(k) < z exactly when at least
k of the Q draws fall below z, i.e. Binomial(Q, F(z)) >= k.  This module
evaluates both sides of that identity for two families of Q: the time
fractional negative binomial process (TFNB), i.e. the k=1 GFCP at a gamma
clock, and the space-time fractional Poisson process (STFPP).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy import stats
from scipy.special import gammaln

from .errors import DivergentSeriesError, EvaluationError, ParameterError
from .gcp_core import GcpParams
from .subordinators import BernsteinFn

EPS = np.finfo(float).eps
CANCEL_LIMIT = 1e-12
BLOCK = 256
MAX_TERMS = 200_000
# log of the absolute size below which STFPP series terms are dropped
FLOOR_LOG = -45 * math.log(10)


@dataclass(frozen=True)
class TfnbParams:
    """Intensity ``lam``, gamma-clock rate ``a`` and shape rate ``b``, fractional order ``beta``."""

    lam: float
    a: float
    b: float
    beta: float

    def __post_init__(self):
        if not (self.lam > 0 and self.a > 0 and self.b > 0):
            raise ParameterError("lam, a and b must be positive")
        if not 0 < self.beta <= 1:
            raise ParameterError(f"fractional order must lie in (0,1], got {self.beta}")

    @property
    def ratio(self) -> float:
        return self.lam / self.a**self.beta

    def check_guard(self) -> None:
        if self.ratio >= 1:
            raise DivergentSeriesError(
                f"lam / a^beta = {self.ratio:.4g} >= 1: the alternating pmf series is not usable; "
                "sample with tcgfcp_sample instead", ratio=self.ratio)

    def scaled(self, factor: float) -> "TfnbParams":
        return TfnbParams(self.lam * factor, self.a, self.b, self.beta)

    def as_process(self) -> tuple[BernsteinFn, GcpParams]:
        """(gamma Bernstein function, k=1 GCP) whose fractional composition is this process."""
        return BernsteinFn.gamma(self.a, self.b), GcpParams((self.lam,))


@dataclass
class SeriesValue:
    value: float
    error: float
    n_terms: int
    route: str


def _alternating(log_mag, sign, shift: float = 0.0) -> SeriesValue:
    """Sum sign(l) exp(log_mag(l)) for l = 0, 1, ...; log_mag must end up decreasing.

    Float summation with a cancellation estimate; the caller decides
    whether the rounding error is acceptable.
    """
    terms: list[float] = []
    top = -math.inf
    start = 0
    while start < MAX_TERMS:
        idx = np.arange(start, start + BLOCK, dtype=float)
        lm = log_mag(idx)
        top = max(top, float(np.max(lm)))
        if top > 700:
            raise EvaluationError("series terms overflow")
        vals = sign(idx) * np.exp(lm)
        terms.extend(vals.tolist())
        # stop once the envelope is decreasing and far below the largest term
        if lm[-1] < lm[-2] and lm[-1] < top - 40 and lm[-1] < math.log(1e-18):
            tail = float(np.exp(lm[-1]))
            value = math.fsum(terms)
            cancel = math.exp(top) * EPS * 4 * math.sqrt(len(terms))
            return SeriesValue(value, cancel + tail, len(terms), "float")
        start += BLOCK
    raise EvaluationError("series did not converge within the term budget")


def _tfnb_log_coeff(p: TfnbParams, t: float, l):
    """log of Gamma(l beta + b t) / (Gamma(b t) Gamma(beta l + 1)) (lam / a^beta)^l."""
    bt = p.b * t
    return gammaln(l * p.beta + bt) - gammaln(bt) - gammaln(p.beta * l + 1) + l * math.log(p.ratio)


_COEFF_CACHE: dict[tuple, list] = {}


def _tfnb_coeffs_mp(p: TfnbParams, t: float, digits: int, upto: int) -> list:
    """Gamma(l beta + b t) / (Gamma(b t) Gamma(beta l + 1)) x^l for l < upto, cached per precision."""
    # any cached table at equal or higher precision will do
    for (q, tq, dq), table in _COEFF_CACHE.items():
        if q == p and tq == float(t) and dq >= digits and len(table) >= upto:
            return table
    key = (p, float(t), digits)
    cached = _COEFF_CACHE.setdefault(key, [])
    if len(_COEFF_CACHE) > 64:
        _COEFF_CACHE.pop(next(iter(_COEFF_CACHE)))
    if len(cached) < upto:
        with mpmath.workdps(digits):
            beta, bt = mpmath.mpf(p.beta), mpmath.mpf(p.b) * t
            x = mpmath.mpf(p.lam) / mpmath.mpf(p.a) ** beta
            g0 = mpmath.gamma(bt)
            for l in range(len(cached), upto):
                cached.append(mpmath.gamma(l * beta + bt) / (g0 * mpmath.gamma(beta * l + 1)) * x**l)
    return cached


def _tfnb_pmf_mp(p: TfnbParams, n: int, t: float, digits: int) -> float:
    digits = 40 * math.ceil(digits / 40)
    with mpmath.workdps(digits):
        total = mpmath.mpf(0)
        binom = mpmath.mpf(1)  # C(l, n), advanced along l
        l = n
        small = 0
        coeffs = _tfnb_coeffs_mp(p, t, digits, n + BLOCK)
        while small < 3:
            if l >= len(coeffs):
                coeffs = _tfnb_coeffs_mp(p, t, digits, 2 * l)
            term = binom * coeffs[l]
            total += term if (l - n) % 2 == 0 else -term
            small = small + 1 if abs(term) < mpmath.mpf(10) ** (-20) * max(abs(total), mpmath.mpf(10) ** -300) else 0
            l += 1
            binom = binom * l / (l - n)
            if l - n > MAX_TERMS:
                raise EvaluationError("high-precision TFNB series did not converge")
        return float(total)


def tfnb_pmf_value(p: TfnbParams, n: int, t: float) -> SeriesValue:
    """Pr(Q(t) = n) = sum_{l >= n} (-1)^{l+n} C(l, n) Gamma(l beta + b t) / (Gamma(b t) Gamma(beta l + 1)) x^l."""
    p.check_guard()
    if n < 0:
        raise ParameterError("n must be nonnegative")
    if t <= 0:
        return SeriesValue(float(n == 0), 0.0, 0, "exact")

    def log_mag(j):
        l = j + n
        return gammaln(l + 1) - gammaln(n + 1) - gammaln(j + 1) + _tfnb_log_coeff(p, t, l)

    res = _alternating(log_mag, lambda j: np.where(j % 2 == 0, 1.0, -1.0))
    if res.error > CANCEL_LIMIT:
        top = float(np.max(log_mag(np.arange(0, 4 * BLOCK, dtype=float)))) / math.log(10)
        val = _tfnb_pmf_mp(p, n, t, 30 + max(0, int(top)))
        return SeriesValue(val, 1e-18, res.n_terms, "mpmath")
    return res


def tfnb_pmf(p: TfnbParams, n: int, t: float) -> float:
    """State probability of the TFNB process; clamps tiny negative rounding and errors on a larger clamp."""
    v = tfnb_pmf_value(p, n, t)
    if v.value < -1e-10:
        raise EvaluationError(f"TFNB pmf came out at {v.value:.3g} < 0")
    return max(v.value, 0.0)


def tfnb_pmf_vector(p: TfnbParams, t: float, n_max: int) -> np.ndarray:
    return np.array([tfnb_pmf(p, n, t) for n in range(n_max + 1)])


def tfnb_pgf(p: TfnbParams, u: float, t: float) -> float:
    """sum_k (-lam (1-u))^k Gamma(b t + k beta) / (Gamma(k beta + 1) a^{k beta} Gamma(b t))."""
    if abs(u) > 1:
        raise ParameterError("pgf argument must satisfy |u| <= 1")
    if u == 1 or t == 0:
        return 1.0
    y = p.ratio * abs(1 - u)
    if y >= 1:
        raise DivergentSeriesError(f"pgf series ratio {y:.4g} >= 1 at u = {u}", ratio=y)
    bt = p.b * t
    sgn = -1.0 if u < 1 else 1.0

    def log_mag(k):
        return gammaln(bt + k * p.beta) - gammaln(k * p.beta + 1) - gammaln(bt) + k * math.log(y)

    res = _alternating(log_mag, lambda k: np.where(k % 2 == 0, 1.0, sgn))
    if res.error > CANCEL_LIMIT:
        raise EvaluationError(f"pgf series lost accuracy (error {res.error:.3g})")
    return res.value


def tfnb_factorial_moment(p: TfnbParams, m: int, t: float) -> float:
    """E Q(Q-1)...(Q-m+1) = lam^m m! Gamma(b t + m beta) / (Gamma(m beta + 1) a^{m beta} Gamma(b t))."""
    if m < 1:
        raise ParameterError("order must be at least one")
    bt = p.b * t
    return math.exp(m * math.log(p.lam) + math.lgamma(m + 1) + math.lgamma(bt + m * p.beta)
                    - math.lgamma(m * p.beta + 1) - m * p.beta * math.log(p.a) - math.lgamma(bt))


# ---------------------------------------------------------------------------
# STFPP, summed independently in high precision


@lru_cache(maxsize=256)
def _stfpp_table(alpha: float, beta: float, c: float, n_max: int) -> np.ndarray:
    """Pr(N = n) for n <= n_max from sum_m (-c)^m C(beta m, n) / Gamma(alpha m + 1).

    1/Gamma(beta m + 1 - n) is the falling factorial of beta m over
    Gamma(beta m + 1), which turns the series into generalized binomials.
    |C(x, n)| <= 2^(x+1) bounds every term uniformly in n, so one envelope
    fixes both the working precision and the number of terms.
    """
    def env(m):
        return m * math.log(c) + (beta * m + 1) * math.log(2) - gammaln(alpha * m + 1)

    m = np.arange(0, 1 << 12, dtype=float)
    e = env(m)
    while e[-1] > FLOOR_LOG:
        m = np.arange(0, 2 * m.size, dtype=float)
        if m.size > MAX_TERMS:
            raise EvaluationError("STFPP series did not converge")
        e = env(m)
    top = int(np.argmax(e))
    n_terms = top + int(np.argmax(e[top:] < FLOOR_LOG)) + 1
    digits = 40 + max(0, int(math.ceil(float(e[top]) / math.log(10))))
    with mpmath.workdps(digits):
        a, b, cc = mpmath.mpf(alpha), mpmath.mpf(beta), mpmath.mpf(c)
        total = [mpmath.mpf(0)] * (n_max + 1)
        for k in range(n_terms):
            weight = (-cc) ** k * mpmath.rgamma(a * k + 1)
            x = b * k
            binom = mpmath.mpf(1)
            for n in range(n_max + 1):
                total[n] += weight * binom
                binom = binom * (x - n) / (n + 1)
        return np.array([float(v if n % 2 == 0 else -v) for n, v in enumerate(total)])


def stfpp_pmf(alpha: float, beta: float, lam: float, n: int, t: float) -> float:
    """Pr(N(t) = n) = (-1)^n / n! sum_m (-lam^beta t^alpha)^m Gamma(beta m + 1) / (Gamma(beta m + 1 - n) Gamma(alpha m + 1)).

    Evaluated through the equivalent binomial form cached by ``_stfpp_table``.
    """
    if not (0 < alpha <= 1 and 0 < beta <= 1):
        raise ParameterError("indices must lie in (0,1]")
    if n < 0:
        raise ParameterError("n must be nonnegative")
    if lam == 0 or t == 0:
        return float(n == 0)
    if lam < 0:
        raise ParameterError("intensity must be nonnegative")
    size = max(64, 1 << int(n).bit_length())
    return max(float(_stfpp_table(float(alpha), float(beta), float(lam**beta * t**alpha), size)[n]), 0.0)


# ---------------------------------------------------------------------------
# order statistic identities


def _binom_below(n: np.ndarray, k: int, F: float) -> np.ndarray:
    """Pr(Binomial(n, F) < k)."""
    return stats.binom.cdf(k - 1, n, F)


def _order_sides(pmf, pmf_scaled, k_stat: int, F: float) -> tuple[float, float]:
    if k_stat < 1:
        raise ParameterError("order index must be at least one")
    if not 0 <= F <= 1:
        raise ParameterError("F(z) must lie in [0,1]")
    head = np.array([pmf(n) for n in range(k_stat)])
    at_least = 1.0 - math.fsum(head)
    if at_least <= 0:
        raise EvaluationError("Pr(Q >= k) vanishes")
    # numerator = Pr(Q >= k) - sum_{n >= k} Pr(Bin(n, F) < k) Pr(Q = n); the
    # binomial factor decays geometrically, so the sum truncates early
    miss = 0.0
    n = k_stat
    mass = at_least
    while True:
        w = float(_binom_below(np.array(n), k_stat, F))
        pn = pmf(n)
        miss += w * pn
        mass -= pn
        n += 1
        if w * max(mass, 0.0) < 1e-15 or w == 0.0:
            break
        if n > 100_000:
            raise EvaluationError("order statistic sum did not settle")
    lhs = (at_least - miss) / at_least
    tail_scaled = 1.0 - math.fsum(pmf_scaled(n) for n in range(k_stat))
    rhs = tail_scaled / at_least
    return lhs, rhs


def kth_order_tfnb(p: TfnbParams, k_stat: int, F_at_z: float, t: float) -> tuple[float, float]:
    """(lhs, rhs) of Pr(X_(k) < z | Q >= k) = Pr(Q(t, lam F(z)) >= k) / Pr(Q(t, lam) >= k)."""
    p.check_guard()
    scaled = p.scaled(F_at_z) if F_at_z > 0 else None
    return _order_sides(lambda n: tfnb_pmf(p, n, t),
                        (lambda n: tfnb_pmf(scaled, n, t)) if scaled else (lambda n: float(n == 0)),
                        k_stat, F_at_z)


def kth_order_stfpp(alpha: float, beta: float, lam: float, k_stat: int, F_at_z: float,
                    t: float) -> tuple[float, float]:
    """(lhs, rhs) of the same identity for the space-time fractional Poisson process."""
    return _order_sides(lambda n: stfpp_pmf(alpha, beta, lam, n, t),
                        lambda n: stfpp_pmf(alpha, beta, lam * F_at_z, n, t), k_stat, F_at_z)


def kth_order_mc(sizes: np.ndarray, k_stat: int, F_at_z: float,
                 rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo of Pr(X_(k) < z | Q >= k) from sampled sizes: (estimate, standard error)."""
    sizes = np.asarray(sizes)
    keep = sizes >= k_stat
    if not keep.any():
        raise EvaluationError("no sampled size reaches the order index")
    below = rng.binomial(sizes[keep], F_at_z)
    hit = below >= k_stat
    est = float(hit.mean())
    return est, math.sqrt(max(est * (1 - est), 1e-300) / hit.size)
