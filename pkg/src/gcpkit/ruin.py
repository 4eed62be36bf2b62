"""Risk model with batch claim arrivals from a subordinated GCP.

The surplus is U(t) = u + c t - (sum of claims), claims arriving in
batches at the jumps of M(D_f(t)).  Jumps come at total rate f(Lambda)
with batch-size weights w_n = rate(n) / f(Lambda), so the aggregate claim
of one jump has the mixer distribution W(x) = sum_n w_n F^{*n}(x).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammainc

from .combin import convolution_powers
from .errors import EvaluationError, ParameterError
from .gcp_core import GcpParams
from .subordinators import BernsteinFn
from .timechange.tcgcp import tcgcp_rate_table, tcgcp_rate_tails

MIXER_TOL = 1e-9


@dataclass(frozen=True)
class ClaimDist:
    """Claim-size law: ``exponential`` with rate ``theta`` or ``lattice`` on multiples of ``unit``.

    For the lattice family ``probs[i]`` is Pr(Z = i * unit), with probs[0] = 0.
    """

    family: str
    theta: float = 1.0
    unit: float = 1.0
    probs: tuple[float, ...] = ()

    @classmethod
    def exponential(cls, theta: float) -> "ClaimDist":
        if theta <= 0:
            raise ParameterError("exponential claim rate must be positive")
        return cls("exponential", theta=float(theta))

    @classmethod
    def deterministic(cls, d: float) -> "ClaimDist":
        return cls.lattice(d, [0.0, 1.0])

    @classmethod
    def lattice(cls, unit: float, probs) -> "ClaimDist":
        probs = np.asarray(probs, dtype=float)
        if unit <= 0 or probs.size < 2 or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
            raise ParameterError("lattice claims need a positive unit and a probability vector")
        if probs[0] > 0:
            raise ParameterError("claims must be strictly positive")
        return cls("lattice", unit=float(unit), probs=tuple(probs.tolist()))

    @classmethod
    def parse(cls, text: str) -> "ClaimDist":
        """``exp:1`` or ``det:2`` or ``lattice:0.5:0,0.3,0.7``."""
        parts = text.strip().split(":")
        try:
            if parts[0] in ("exp", "exponential"):
                return cls.exponential(float(parts[1]))
            if parts[0] in ("det", "deterministic"):
                return cls.deterministic(float(parts[1]))
            if parts[0] == "lattice":
                return cls.lattice(float(parts[1]), [float(x) for x in parts[2].split(",")])
        except (IndexError, ValueError) as exc:
            raise ParameterError(f"cannot parse claim law {text!r}") from exc
        raise ParameterError(f"unsupported claim family {parts[0]!r}")

    @property
    def mean(self) -> float:
        if self.family == "exponential":
            return 1.0 / self.theta
        return self.unit * float(np.dot(np.arange(len(self.probs)), self.probs))

    def mgf(self, r: float) -> float:
        if self.family == "exponential":
            return self.theta / (self.theta - r) if r < self.theta else math.inf
        return float(np.dot(self.probs, np.exp(r * self.unit * np.arange(len(self.probs)))))

    @property
    def mgf_bound(self) -> float:
        return self.theta if self.family == "exponential" else math.inf

    def conv_cdf(self, n_max: int, x) -> np.ndarray:
        """F^{*n}(x) for n = 0..n_max; result shape (n_max+1,) + x.shape."""
        x = np.asarray(x, dtype=float)
        n = np.arange(n_max + 1).reshape((-1,) + (1,) * x.ndim)
        if self.family == "exponential":
            with np.errstate(invalid="ignore"):
                out = np.where(n == 0, 1.0, gammainc(np.maximum(n, 1), self.theta * np.maximum(x, 0.0)))
            return np.where(x >= 0, out, 0.0)
        table = self._lattice_table(n_max)
        cdf = np.cumsum(table, axis=1)
        idx = np.floor(x / self.unit + 1e-12).astype(int)
        res = np.where(idx[None] >= 0, cdf[:, np.clip(idx, 0, cdf.shape[1] - 1)], 0.0)
        return res

    def _lattice_table(self, n_max: int) -> np.ndarray:
        probs = np.asarray(self.probs)
        top = (probs.size - 1) * max(n_max, 1)
        return convolution_powers(probs[1:], top, z_max=n_max)

    def sample_sums(self, n: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sums of n iid claims for each entry of n."""
        n = np.asarray(n)
        if self.family == "exponential":
            out = np.zeros(n.shape)
            pos = n > 0
            out[pos] = rng.gamma(n[pos], 1.0 / self.theta)
            return out
        values = np.arange(len(self.probs))
        out = np.zeros(n.shape)
        for m in np.unique(n[n > 0]):
            sel = n == m
            draws = rng.choice(values, size=(int(sel.sum()), int(m)), p=self.probs)
            out[sel] = self.unit * draws.sum(axis=1)
        return out


@dataclass
class RiskModel:
    c: float
    claims: ClaimDist
    f: BernsteinFn
    p: GcpParams
    u: float = 0.0

    def __post_init__(self):
        if self.c <= 0:
            raise ParameterError("premium rate must be positive")
        if self.u < 0:
            raise ParameterError("initial capital must be nonnegative")

    @property
    def jump_rate(self) -> float:
        return float(self.f(self.p.total))


def safety_loading(model: RiskModel) -> float:
    """c / (mu q1) - 1, where q1 = sum_j j lam_j E D_f(1) is the claim-count rate."""
    q1 = float(np.dot(model.p.sizes, model.p.lam)) * model.f.mean(1.0)
    return model.c / (model.claims.mean * q1) - 1.0


# ---------------------------------------------------------------------------
# mixer distribution


@dataclass
class MixerDistribution:
    weights: np.ndarray  # weights[n] for batch size n (weights[0] = 0)
    dropped: float
    claims: ClaimDist = field(repr=False)

    @property
    def n_max(self) -> int:
        return self.weights.size - 1

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        vals = np.tensordot(self.weights, self.claims.conv_cdf(self.n_max, x_arr), axes=(0, 0))
        return float(vals) if x_arr.ndim == 0 else vals

    def mean(self) -> float:
        return self.claims.mean * float(np.dot(np.arange(self.weights.size), self.weights))

    def integrated_survival(self, y: float) -> float:
        """int_0^y (1 - W(u)) du in closed form."""
        n = np.arange(self.weights.size)
        if self.claims.family == "exponential":
            # E min(G_n, y) for G_n ~ Gamma(n, theta)
            th = self.claims.theta
            em = np.where(n > 0, n / th * gammainc(n + 1, th * y) + y * (1 - gammainc(np.maximum(n, 1), th * y)),
                          0.0)
            return float(np.dot(self.weights, em)) + self.dropped * y
        # lattice: 1 - W is constant on each cell [m h, (m+1) h)
        h = self.claims.unit
        m_top = int(math.floor(y / h))
        cells = self.cdf(h * np.arange(m_top + 1))
        full = h * float(np.sum(1.0 - cells[:-1])) if m_top else 0.0
        return full + (y - m_top * h) * (1.0 - float(cells[-1]))


def mixer(model: RiskModel, tol: float = MIXER_TOL) -> MixerDistribution:
    """Batch-size weights, truncated once the dropped weight falls below ``tol``."""
    fl = model.jump_rate
    n = 16
    while True:
        tails = tcgcp_rate_tails(model.f, model.p, n) / fl
        ok = np.nonzero(tails < tol)[0]
        if ok.size:
            n_cut = max(int(ok[0]), 1)
            break
        if n >= 4096:
            raise EvaluationError(f"mixer weights still above {tol:g} beyond batch size 4096")
        n *= 2
    w = tcgcp_rate_table(model.f, model.p, n_cut) / fl
    w[0] = 0.0
    return MixerDistribution(w, float(tails[n_cut]), model.claims)


def mixer_cdf(model: RiskModel, x):
    return mixer(model).cdf(x)


# ---------------------------------------------------------------------------
# zero-capital ruin and deficit


def _loading_check(model: RiskModel, strict: bool) -> float:
    rho = safety_loading(model)
    if rho <= 0:
        msg = f"safety loading {rho:.4g} is not positive; ruin is certain"
        if strict:
            raise ParameterError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return rho


def k0y(model: RiskModel, y, route: str = "quadrature"):
    """Pr(ruin, deficit <= y) at zero initial capital: (f(Lambda)/c) int_0^y (1 - W(u)) du.

    ``quadrature`` integrates W adaptively; ``closed`` uses the closed-form
    integrated survival of the mixer.
    """
    if model.u != 0:
        raise ParameterError("the deficit formula is for zero initial capital")
    _loading_check(model, strict=False)
    mix = mixer(model)
    scale = model.jump_rate / model.c
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(ys < 0):
        raise ParameterError("y must be nonnegative")
    out = np.empty(ys.size)
    for i, yy in enumerate(ys):
        if route == "closed":
            out[i] = scale * mix.integrated_survival(float(yy))
        elif route == "quadrature":
            pts = None
            if model.claims.family == "lattice":
                pts = model.claims.unit * np.arange(1, int(yy / model.claims.unit) + 1)
                pts = pts[:100] if pts.size else None
            val, _ = integrate.quad(lambda v: 1.0 - mix.cdf(v), 0.0, float(yy), points=pts,
                                    epsabs=1e-13, epsrel=1e-12, limit=400)
            out[i] = scale * val
        else:
            raise ParameterError(f"unknown route {route!r}")
    return float(out[0]) if np.ndim(y) == 0 else out


def psi0(model: RiskModel) -> float:
    """Zero-capital ruin probability: (f(Lambda)/c) times the mixer mean, i.e. 1/(1 + rho)."""
    _loading_check(model, strict=True)
    mix = mixer(model)
    return model.jump_rate / model.c * mix.mean()


def lundberg_exponent(model: RiskModel) -> float:
    """R > 0 with f(Lambda) (E e^{R Y} - 1) = c R for the aggregate jump claim Y."""
    _loading_check(model, strict=True)
    mix = mixer(model)
    n = np.arange(mix.weights.size)
    fl = model.jump_rate

    def g(r):
        m = model.claims.mgf(r)
        with np.errstate(over="ignore"):
            return fl * (float(np.dot(mix.weights, m**n)) + mix.dropped - 1.0) - model.c * r

    hi = min(model.claims.mgf_bound, 50.0) * (1 - 1e-9)
    # g is convex with g(0) = 0 and g'(0) < 0; the weights are truncated so g stays finite
    lo = 1e-10
    while g(hi) < 0 and hi < 1e3:
        hi *= 2
    if g(hi) < 0:
        raise EvaluationError("no adjustment coefficient found")
    grid = np.linspace(lo, hi, 400)
    vals = np.array([g(r) for r in grid])
    k = int(np.argmax(vals > 0))
    return float(optimize.brentq(g, grid[k - 1], grid[k], xtol=1e-14))


# ---------------------------------------------------------------------------
# simulation


@dataclass
class LadderSample:
    """Record highs of the claim-surplus process S(t) = claims - c t at claim epochs.

    ``values[i]`` are the record heights of path ``paths[i]``, increasing
    within a path.  Paths stop once S sits ``stop_level`` below its record
    or at ``horizon``; ``residual`` is the Lundberg bound on ruin after the
    stop, averaged over paths, for initial capital 0.
    """

    paths: np.ndarray
    values: np.ndarray
    n_paths: int
    horizon: float
    residual: float
    starts: np.ndarray = field(repr=False, default=None)
    counts: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        order = np.lexsort((self.values, self.paths))
        self.paths, self.values = self.paths[order], self.values[order]
        self.counts = np.bincount(self.paths, minlength=self.n_paths)
        self.starts = np.concatenate([[0], np.cumsum(self.counts)[:-1]])

    def first_exceedance(self, u: float) -> tuple[np.ndarray, np.ndarray]:
        """(ruined, deficit) per path for initial capital u."""
        ok = self.values > u
        # first record above u within each path
        idx = np.full(self.n_paths, -1)
        pos = np.nonzero(ok)[0]
        if pos.size:
            pid = self.paths[pos]
            first = np.unique(pid, return_index=True)
            idx[first[0]] = pos[first[1]]
        ruined = idx >= 0
        deficit = np.full(self.n_paths, np.nan)
        deficit[ruined] = self.values[idx[ruined]] - u
        return ruined, deficit


def simulate_ladders(model: RiskModel, n_paths: int, rng: np.random.Generator, horizon: float = 1e4,
                     stop_level: float | None = None) -> LadderSample:
    """Event-driven simulation of the claim-surplus process, keeping record highs.

    A path is stopped when it falls ``stop_level`` below its running record
    (default: where the Lundberg bound drops under 1e-12) or reaches the
    horizon.  Ruin for capital u after the stop is bounded by e^{-R (distance)}.
    """
    rho = _loading_check(model, strict=False)
    mix = mixer(model)
    fl = model.jump_rate
    cdf = np.cumsum(mix.weights)
    cdf /= cdf[-1]
    if stop_level is None:
        if rho > 0:
            r = lundberg_exponent(model)
            stop_level = math.log(1e12) / r
        else:
            stop_level = math.inf
    r_exp = lundberg_exponent(model) if rho > 0 else 0.0
    s = np.zeros(n_paths)
    rec = np.zeros(n_paths)
    t = np.zeros(n_paths)
    live = np.arange(n_paths)
    rec_paths: list[np.ndarray] = []
    rec_vals: list[np.ndarray] = []
    while live.size:
        dt = rng.exponential(1.0 / fl, live.size)
        batch = np.searchsorted(cdf, rng.random(live.size), side="right")
        batch = np.minimum(batch, mix.n_max)
        claim = model.claims.sample_sums(batch, rng)
        t[live] += dt
        s[live] += claim - model.c * dt
        sl = s[live]
        up = sl > rec[live]
        if up.any():
            rec_paths.append(live[up])
            rec_vals.append(sl[up])
            rec[live[up]] = sl[up]
        stop = (rec[live] - sl > stop_level) | (t[live] >= horizon)
        live = live[~stop]
    residual = float(np.mean(np.exp(-r_exp * np.maximum(rec - s, 0.0)))) if rho > 0 else 1.0
    paths = np.concatenate(rec_paths) if rec_paths else np.zeros(0, dtype=int)
    vals = np.concatenate(rec_vals) if rec_vals else np.zeros(0)
    return LadderSample(paths, vals, n_paths, horizon, residual)


@dataclass
class RuinEstimate:
    psi: float
    se: float
    ci: tuple[float, float]
    deficits: np.ndarray = field(repr=False)
    residual_bound: float
    n_paths: int


def ruin_mc(model: RiskModel, horizon: float, n_paths: int, rng: np.random.Generator,
            z: float = 3.0) -> RuinEstimate:
    """Empirical ruin probability at the model's capital, deficit draws and a binomial interval.

    ``residual_bound`` is the Lundberg bound on the ruin mass lost to the
    finite horizon or early stopping.
    """
    lad = simulate_ladders(model, n_paths, rng, horizon)
    ruined, deficit = lad.first_exceedance(model.u)
    psi = float(ruined.mean())
    se = math.sqrt(max(psi * (1 - psi), 1e-300) / n_paths)
    return RuinEstimate(psi, se, (psi - z * se, psi + z * se), deficit[ruined], lad.residual, n_paths)


def k_mc(lad: LadderSample, u: float, y) -> tuple[np.ndarray, np.ndarray]:
    """Estimates of K(u, y) and their binomial standard errors."""
    ruined, deficit = lad.first_exceedance(u)
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    hit = ruined[:, None] & (np.nan_to_num(deficit, nan=np.inf)[:, None] <= ys[None, :])
    est = hit.mean(axis=0)
    return est, np.sqrt(np.maximum(est * (1 - est), 1e-300) / lad.n_paths)


# ---------------------------------------------------------------------------
# governing-equation residual


@dataclass
class RuinResidual:
    u_grid: np.ndarray
    residual: np.ndarray
    se: np.ndarray
    y: float
    form: str

    def consistent(self, z: float = 4.0) -> bool:
        return bool(np.all(np.abs(self.residual) <= z * self.se + 1e-12))


def _residual_batch(lad: LadderSample, mix: MixerDistribution, model: RiskModel, u_grid: np.ndarray,
                    y: float, fine: np.ndarray, form: str) -> np.ndarray:
    k_fine = np.array([k_mc(lad, float(v), y)[0][0] for v in fine])
    w_fine = mix.cdf(fine)
    w_shift = mix.cdf(fine + y)
    h = fine[1] - fine[0]
    dw = np.diff(w_fine, prepend=0.0)
    # int_0^v K(v - x) dW(x) on the fine grid by a Stieltjes sum
    conv = np.array([np.dot(k_fine[i::-1], dw[: i + 1]) for i in range(fine.size)])
    rhs = model.jump_rate / model.c * (k_fine + w_fine - w_shift - conv)
    idx = np.searchsorted(fine, u_grid - 1e-12)
    if form == "integrated":
        cum = np.concatenate([[0.0], np.cumsum((rhs[1:] + rhs[:-1]) * h / 2)])
        return k_fine[idx] - k_fine[0] - cum[idx]
    d = np.gradient(k_fine, h)
    return d[idx] - rhs[idx]


def ruin_ode_residual(model: RiskModel, u_grid, y: float, n_paths: int, rng: np.random.Generator,
                      batches: int = 10, form: str = "integrated", h: float = 0.02) -> RuinResidual:
    """Residual of the integro-differential equation for K(u, y), with K from simulation.

    ``integrated`` integrates both sides from 0 to u, which avoids
    differencing noisy estimates; ``derivative`` differences K directly.
    Standard errors come from independent batches of paths.
    """
    if form not in ("integrated", "derivative"):
        raise ParameterError(f"unknown residual form {form!r}")
    u_grid = np.asarray(u_grid, dtype=float)
    mix = mixer(model)
    fine = np.arange(0.0, u_grid.max() + 2 * h, h)
    per = max(n_paths // batches, 1)
    res = np.stack([_residual_batch(simulate_ladders(model, per, rng), mix, model, u_grid, y, fine, form)
                    for _ in range(batches)])
    return RuinResidual(u_grid, res.mean(axis=0), res.std(axis=0, ddof=1) / math.sqrt(batches), y, form)
