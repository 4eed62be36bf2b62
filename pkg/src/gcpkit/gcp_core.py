"""The homogeneous generalized counting process.

M(t) jumps by j in {1..k} at rate lam_j.  Equivalently it is compound
Poisson: events arrive at total rate Lambda = sum(lam) and each event has
size j with probability lam_j / Lambda.  The pmf code uses the compound
form, Pr(M(t)=n) = sum_z Poisson(z; Lambda t) Pr(S_z = n), which keeps every
intermediate quantity a probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import gammainc

from .combin import convolution_powers
from .errors import ParameterError
from .specfun import mittag_leffler

DEFAULT_TAIL = 1e-10
_TAIL_SLACK = 1e-15


@dataclass(frozen=True)
class GcpParams:
    lam: tuple[float, ...]
    total: float = field(init=False)

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lam)
        if not lam:
            raise ParameterError("at least one jump rate is required")
        if not all(np.isfinite(x) and x > 0 for x in lam):
            raise ParameterError(f"jump rates must be positive and finite, got {lam}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "total", float(sum(lam)))

    @classmethod
    def parse(cls, text: str) -> "GcpParams":
        try:
            return cls(tuple(float(x) for x in text.split(",") if x.strip()))
        except ValueError as exc:
            raise ParameterError(f"cannot parse rates {text!r}") from exc

    @property
    def k(self) -> int:
        return len(self.lam)

    @property
    def rates(self) -> np.ndarray:
        return np.asarray(self.lam)

    @property
    def jump_probs(self) -> np.ndarray:
        return self.rates / self.total

    @property
    def sizes(self) -> np.ndarray:
        return np.arange(1, self.k + 1)

    @property
    def mean_rate(self) -> float:
        return float(np.dot(self.sizes, self.rates))

    @property
    def second_rate(self) -> float:
        return float(np.dot(self.sizes ** 2, self.rates))

    def jump_symbol(self, u):
        """P(u) - Lambda = sum_j lam_j (u^j - 1), the log-pgf per unit time."""
        u = np.asarray(u, dtype=float)
        return sum(lj * (u ** j - 1.0) for j, lj in enumerate(self.lam, start=1))


@dataclass
class TruncatedPmf:
    """Probabilities on 0..N together with an upper bound on the missing mass."""

    probs: np.ndarray
    tail_bound: float
    method: str = ""
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        self.tail_bound = float(self.tail_bound)

    def __len__(self) -> int:
        return len(self.probs)

    def __getitem__(self, n):
        return self.probs[n]

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    @property
    def mass(self) -> float:
        return float(np.sum(self.probs))

    def check(self, tol: float = 1e-12) -> None:
        """Raise if the stored values violate the nonnegativity or mass bounds."""
        if np.any(self.probs < -tol):
            raise ParameterError(f"negative probability {self.probs.min():.3e}")
        m = self.mass
        if m > 1 + tol:
            raise ParameterError(f"total mass {m!r} exceeds one")
        if m + self.tail_bound < 1 - tol:
            raise ParameterError(f"mass {m!r} plus tail bound {self.tail_bound!r} falls short of one")


@dataclass
class SamplePath:
    """Right-continuous step path with jumps at ``event_times``."""

    event_times: np.ndarray
    jump_sizes: np.ndarray
    horizon: float

    def __post_init__(self):
        self.event_times = np.asarray(self.event_times, dtype=float)
        self.jump_sizes = np.asarray(self.jump_sizes, dtype=np.int64)

    def value(self, t):
        levels = np.concatenate([[0], np.cumsum(self.jump_sizes)])
        return levels[np.searchsorted(self.event_times, t, side="right")]

    @property
    def final(self) -> int:
        return int(self.jump_sizes.sum())


# ---------------------------------------------------------------------------
# compound-Poisson machinery shared by the pmf evaluators


def survival_of(probs: np.ndarray, m_max: int) -> np.ndarray:
    """Pr(X > m) for m = 0..m_max, with probs[j-1] = Pr(X=j), formed from the upper end."""
    probs = np.asarray(probs, dtype=float)
    tail = np.zeros(m_max + 1)
    rev = np.cumsum(probs[::-1])[::-1]  # rev[i] = sum_{j >= i+1} probs[j-1]
    upto = min(m_max + 1, len(probs))
    # Pr(X > m) = sum_{j >= m+1} probs[j-1] = rev[m]
    tail[:upto] = rev[:upto]
    return tail


def compound_pmf(jump_probs, mean_count: float, n_max: int,
                 q: np.ndarray | None = None) -> np.ndarray:
    """Pr(S_N = n) for N ~ Poisson(mean_count) and iid jumps with the given law."""
    if q is None:
        q = convolution_powers(jump_probs, n_max)
    z = np.arange(q.shape[0])
    w = stats.poisson.pmf(z, mean_count) if mean_count > 0 else (z == 0).astype(float)
    return w @ q[:, :n_max + 1]


def compound_tails(jump_probs, mean_count: float, n_max: int,
                   q: np.ndarray | None = None) -> np.ndarray:
    """Pr(S_N > m) for every m = 0..n_max.

    Uses the time-integrated forward equation: the process leaves {0..m}
    only by a jump from some l <= m that overshoots m, so
    Pr(S > m) = sum_{l<=m} Pr(X > m-l) * sum_z Q[z,l] * P(z+1, mean_count),
    with P the regularized lower incomplete gamma.  Every term is
    nonnegative, so the result carries no cancellation.
    """
    if q is None:
        q = convolution_powers(jump_probs, n_max)
    if mean_count <= 0:
        return np.zeros(n_max + 1)
    z = np.arange(q.shape[0])
    occupation = gammainc(z + 1.0, mean_count) @ q[:, :n_max + 1]
    surv = survival_of(jump_probs, n_max)
    return np.convolve(occupation, surv)[:n_max + 1]


def certified(tail: float) -> float:
    return float(tail) * (1 + 1e-12) + _TAIL_SLACK


def choose_n_max(jump_probs, mean_count: float, target: float = DEFAULT_TAIL,
                 start: int | None = None) -> int:
    """Smallest N with Pr(S_N > N) below target, by doubling a candidate table."""
    k = len(jump_probs)
    mean_jump = float(np.dot(np.arange(1, k + 1), jump_probs))
    sd = np.sqrt(mean_count) * k
    n = start or max(8, int(mean_count * mean_jump + 12 * sd + 4 * k))
    while True:
        tails = compound_tails(jump_probs, mean_count, n)
        ok = np.nonzero(tails < target)[0]
        if ok.size:
            return int(ok[0])
        if n > 20_000:
            raise ParameterError("truncation level exceeds desk scale")
        n *= 2


# ---------------------------------------------------------------------------
# public operations


def gcp_pmf(p: GcpParams, t: float, n_max: int | None = None) -> TruncatedPmf:
    """State probabilities of M(t) on 0..n_max with the exact tail mass."""
    if t < 0:
        raise ParameterError("t must be nonnegative")
    mu = p.total * t
    if n_max is None:
        n_max = choose_n_max(p.jump_probs, mu)
    q = convolution_powers(p.jump_probs, n_max)
    probs = compound_pmf(p.jump_probs, mu, n_max, q)
    tail = compound_tails(p.jump_probs, mu, n_max, q)[-1]
    return TruncatedPmf(probs, certified(tail), method="compound")


def gcp_pgf(p: GcpParams, u, t: float):
    u_arr = np.asarray(u, dtype=float)
    if np.any(np.abs(u_arr) > 1):
        raise ParameterError("pgf argument must satisfy |u| <= 1")
    out = np.exp(p.jump_symbol(u_arr) * t)
    return float(out) if np.ndim(out) == 0 else out


def gcp_moments(p: GcpParams, t: float) -> tuple[float, float]:
    if t < 0:
        raise ParameterError("t must be nonnegative")
    return p.mean_rate * t, p.second_rate * t


def gcp_sample(p: GcpParams, T: float, rng: np.random.Generator) -> SamplePath:
    """Exact path on [0, T] from exponential inter-arrival times."""
    if T <= 0:
        raise ParameterError("horizon must be positive")
    times = []
    clock = 0.0
    batch = max(16, int(p.total * T * 1.2) + 16)
    while True:
        gaps = rng.exponential(1.0 / p.total, size=batch)
        arrivals = clock + np.cumsum(gaps)
        inside = arrivals[arrivals <= T]
        times.append(inside)
        if inside.size < batch:
            break
        clock = arrivals[-1]
    ev = np.concatenate(times)
    sizes = rng.choice(p.sizes, size=ev.size, p=p.jump_probs)
    return SamplePath(ev, sizes, T)


def gcp_sample_counts(p: GcpParams, t, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of M(t); the count of size-j jumps is Poisson(lam_j t) independently over j."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(np.broadcast_shapes(t.shape, (size,)) if t.ndim else size, dtype=np.int64)
    for j, lj in enumerate(p.lam, start=1):
        out += j * rng.poisson(lj * t, size=out.shape)
    return out


def conditional_first_arrival(p: GcpParams, t: float, x: float) -> float:
    """Pr(first arrival <= x | M(t) = 1), which is uniform on [0, t]."""
    if t <= 0:
        raise ParameterError("t must be positive")
    if not 0 <= x <= t:
        raise ParameterError("x must lie in [0, t]")
    return x / t


def sample_conditional_first_arrival(p: GcpParams, t: float, size: int,
                                     rng: np.random.Generator,
                                     max_rounds: int = 1000) -> np.ndarray:
    """Arrival times of paths with M(t)=1, by rejection on raw path pieces.

    A path has M(t)=1 exactly when the first gap is below t, the second
    arrival is after t, and the first jump has size one.
    """
    out = []
    have = 0
    accept = max(p.total * t * np.exp(-p.total * t) * p.jump_probs[0], 1e-6)
    for _ in range(max_rounds):
        m = int(min(5_000_000, (size - have) / accept * 1.2 + 100))
        e1 = rng.exponential(1.0 / p.total, m)
        e2 = rng.exponential(1.0 / p.total, m)
        j1 = rng.choice(p.sizes, size=m, p=p.jump_probs)
        keep = (e1 <= t) & (e1 + e2 > t) & (j1 == 1)
        out.append(e1[keep])
        have += int(keep.sum())
        if have >= size:
            break
    return np.concatenate(out)[:size]


def gfcp_extremes(p: GcpParams, beta: float, t: float, F_at_x: float,
                  mode: str = "max") -> float:
    """Extremes of iid marks X_i ~ F over a fractional GCP count.

    mode="max" gives Pr(max X_i <= x); mode="min" gives Pr(min X_i > x).
    An empty sample counts as satisfying both events.
    """
    if not 0 <= F_at_x <= 1:
        raise ParameterError("F_at_x must lie in [0, 1]")
    if not 0 < beta <= 1:
        raise ParameterError("beta must lie in (0, 1]")
    if t < 0:
        raise ParameterError("t must be nonnegative")
    if mode == "max":
        base = F_at_x
    elif mode == "min":
        base = 1.0 - F_at_x
    else:
        raise ParameterError(f"mode must be 'max' or 'min', got {mode!r}")
    arg = -sum(lj * (1.0 - base ** j) for j, lj in enumerate(p.lam, start=1)) * t ** beta
    return float(mittag_leffler(beta, 1.0, arg))


def poisson_pmf(lam: float, t: float, n_max: int) -> np.ndarray:
    return stats.poisson.pmf(np.arange(n_max + 1), lam * t)


def rates_as_params(lam: Sequence[float]) -> GcpParams:
    return lam if isinstance(lam, GcpParams) else GcpParams(tuple(lam))
