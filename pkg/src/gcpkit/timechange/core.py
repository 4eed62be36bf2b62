"""Shared types and compound-law helpers for the time-changed processes.

Most processes here are compound: a count Z(t) of base-process jumps is
driven by the time change, and each jump has the GCP jump law.  Writing
Q[z, n] = Pr(S_z = n) for the z-fold convolution of the jump law,

    Pr(M(T(t)) = n) = sum_z Q[z, n] Pr(N(T(t)) = z),

where N is a rate-Lambda Poisson process.  Each process therefore only
needs the law of N(T(t)), which is how the modules below are organised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import stats
from scipy.special import gammainc, gammaln

from ..combin import convolution_powers, enumerate_omega
from ..errors import ParameterError
from ..gcp_core import GcpParams, TruncatedPmf, certified, survival_of
from ..ngcp import RateFunctionSet
from ..subordinators import (BernsteinFn, StabilityProfile, inverse_stable_marginal,
                             inverse_stable_rule)


@dataclass(frozen=True)
class InverseStable:
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ParameterError(f"inverse stable index must lie in (0,1], got {self.alpha}")


@dataclass(frozen=True)
class Subordinated:
    f: BernsteinFn


@dataclass(frozen=True)
class Multistable:
    profile: StabilityProfile


ChainItem = Union[InverseStable, Subordinated, Multistable]


@dataclass(frozen=True)
class TimeChangeSpec:
    """A counting process composed with a chain of random clocks.

    ``chain[0]`` is applied to the counting process first, so
    ``(Subordinated(f), InverseStable(a))`` means M(D_f(Y_a(t))).
    """

    base: Union[GcpParams, RateFunctionSet]
    chain: tuple[ChainItem, ...]

    def __post_init__(self):
        if not self.chain:
            raise ParameterError("time-change chain must not be empty")
        for item in self.chain[:-1]:
            if isinstance(item, Multistable):
                raise ParameterError("a multistable clock can only be the outermost time change")

    def describe(self) -> str:
        parts = []
        for item in self.chain:
            if isinstance(item, InverseStable):
                parts.append(f"Y[{item.alpha}]")
            elif isinstance(item, Subordinated):
                parts.append(f"D[{item.f.describe()}]")
            else:
                parts.append(f"H[{item.profile.label}]")
        return "M(" + "(".join(parts) + "(t" + ")" * (len(parts) + 1)

    def sample_times(self, t: float, rng: np.random.Generator, size: int,
                     dt: float | None = None) -> np.ndarray:
        """Draws of the composed clock at time t, outermost first."""
        from ..subordinators import multistable_terminal

        u = np.full(size, float(t))
        for item in reversed(self.chain):
            if isinstance(item, InverseStable):
                u = u if item.alpha == 1 else inverse_stable_marginal(item.alpha, u, rng)
            elif isinstance(item, Subordinated):
                u = subordinator_at(item.f, u, rng)
            else:
                u, _ = multistable_terminal(item.profile, float(t), dt, rng, size)
        return u

    def sample_counts(self, t: float, rng: np.random.Generator, size: int, dt: float | None = None) -> np.ndarray:
        if not isinstance(self.base, GcpParams):
            raise ParameterError("composition sampling needs a homogeneous base process")
        from ..gcp_core import gcp_sample_counts

        u = self.sample_times(t, rng, size, dt)
        return gcp_sample_counts(self.base, u, size, rng)


def subordinator_at(f: BernsteinFn, u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """D_f(u) for an array of independent random times u >= 0."""
    out = np.zeros_like(u, dtype=float)
    pos = u > 0
    if np.any(pos):
        out[pos] = f.sample(u[pos], rng)
    return out


@dataclass
class FirstPassageLaw:
    """Law of a first passage or hitting time; the mass may fall short of one."""

    level: int
    density: Callable = field(repr=False)
    cdf: Callable = field(repr=False)
    total_mass: float
    kind: str = "first_passage"
    method: str = ""

    def __post_init__(self):
        if self.total_mass > 1 + 1e-9:
            raise ParameterError(f"first passage mass {self.total_mass} exceeds one")


# ---------------------------------------------------------------------------
# compound-law helpers


def mix_counts(q: np.ndarray, count_law: np.ndarray, n_max: int) -> np.ndarray:
    """sum_z count_law[z] Q[z, n] for n = 0..n_max."""
    z = min(q.shape[0], count_law.shape[-1])
    return count_law[..., :z] @ q[:z, :n_max + 1]


def overshoot_tail(occupation: np.ndarray, exit_rate_tail: np.ndarray) -> float:
    """sum_{l<=N} occupation[l] * exit_rate_tail[N - l], the mass that jumped beyond N."""
    n = occupation.shape[-1] - 1
    return float(np.dot(occupation, exit_rate_tail[: n + 1][::-1]))


def poisson_law(mu, z_max: int) -> np.ndarray:
    """Poisson(mu) pmf on 0..z_max; mu may be an array (result shape mu.shape + (z_max+1,))."""
    mu = np.asarray(mu, dtype=float)
    z = np.arange(z_max + 1)
    with np.errstate(divide="ignore"):
        out = stats.poisson.pmf(z, mu[..., None])
    out[mu == 0] = (z == 0)
    return out


def overshoot_matrix(surv: np.ndarray) -> np.ndarray:
    """Upper-triangular T[l, m] = surv[m - l], so occupation @ T gives tails for every m."""
    n = surv.size
    idx = np.arange(n)
    diff = idx[None, :] - idx[:, None]
    return np.where(diff >= 0, surv[np.clip(diff, 0, None)], 0.0)


def gcp_tails_grid(p: GcpParams, u, n_max: int, q: np.ndarray | None = None) -> np.ndarray:
    """Pr(M(u) > m) for many times u and every m <= n_max, shape (len(u), n_max+1).

    Built from the integrated forward equation, so each entry is a sum of
    nonnegative terms.
    """
    if q is None:
        q = convolution_powers(p.jump_probs, n_max)
    z = np.arange(n_max + 1)
    mu = p.total * np.atleast_1d(np.asarray(u, dtype=float))
    occ = gammainc(z + 1.0, mu[:, None]) @ q[: n_max + 1, : n_max + 1]
    return occ @ overshoot_matrix(survival_of(p.jump_probs, n_max))


def window_pmf_many(means: np.ndarray, n_max: int) -> np.ndarray:
    """Pr(sum_j j X_j = n) with independent X_j ~ Poisson(means[:, j]), for many rows.

    Direct sum over compositions, evaluated in log space; rows are the
    quadrature nodes of a mixing integral.
    """
    means = np.atleast_2d(np.asarray(means, dtype=float))
    rows, k = means.shape
    with np.errstate(divide="ignore"):
        log_m = np.log(means)
    out = np.zeros((rows, n_max + 1))
    base = -means.sum(axis=1)
    for n in range(n_max + 1):
        acc = np.zeros(rows)
        for c in enumerate_omega(k, n):
            x = np.asarray(c.parts, dtype=float)
            with np.errstate(invalid="ignore"):
                lt = np.where(x > 0, x * log_m, 0.0).sum(axis=1) - gammaln(x + 1).sum()
            acc += np.exp(lt + base)
        out[:, n] = acc
    return out


def chernoff_tail_many(means: np.ndarray, n_max: int) -> np.ndarray:
    """Upper bounds on Pr(sum_j j X_j > n_max) per row, minimized over a grid of u > 1."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    k = means.shape[1]
    log_u = np.linspace(1e-3, 6.0 / k, 600)
    j = np.arange(1, k + 1)
    expo = (np.exp(np.outer(log_u, j)) - 1.0) @ means.T  # (grid, rows)
    bound = expo - (n_max + 1) * log_u[:, None]
    return np.minimum(1.0, np.exp(bound.min(axis=0)))


def rule_for(alpha: float):
    return inverse_stable_rule(float(alpha))


def mc_pmf(samples: np.ndarray, n_max: int, note: str = "") -> TruncatedPmf:
    counts = np.bincount(np.clip(samples, 0, n_max + 1), minlength=n_max + 2)
    probs = counts[: n_max + 1] / samples.size
    tail = counts[n_max + 1] / samples.size
    res = TruncatedPmf(probs, tail, method="mc")
    res.notes.append(note or f"empirical frequencies from {samples.size} draws; tail is the empirical excess")
    return res


def point_mass(n_max: int, method: str) -> TruncatedPmf:
    probs = np.zeros(n_max + 1)
    probs[0] = 1.0
    return TruncatedPmf(probs, certified(0.0), method=method)
