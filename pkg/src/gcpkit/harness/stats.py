"""Goodness-of-fit statistics and mergeable Monte Carlo accumulators.

The test statistics are computed here; scipy supplies only the reference
distributions for p-values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import EvaluationError, ParameterError
from ..gcp_core import TruncatedPmf

SIGNIFICANCE = 1e-3
MIN_EXPECTED = 5.0


@dataclass
class GofReport:
    test: str
    statistic: float
    dof: int
    p_value: float
    significance: float
    n: int
    bins: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.p_value >= self.significance

    def summary(self) -> dict:
        return {"test": self.test, "statistic": self.statistic, "dof": self.dof,
                "p_value": self.p_value, "significance": self.significance,
                "n": self.n, "pass": self.passed}


def _merge_bins(expected: np.ndarray, observed: np.ndarray, labels: list[str]):
    """Merge adjacent cells left to right until each expected count reaches MIN_EXPECTED.

    A short remainder at the right end is folded into the last full cell.
    """
    e_out, o_out, l_out = [], [], []
    e_acc = o_acc = 0.0
    first = None
    for e, o, lab in zip(expected, observed, labels):
        if first is None:
            first = lab
        e_acc += e
        o_acc += o
        if e_acc >= MIN_EXPECTED:
            e_out.append(e_acc)
            o_out.append(o_acc)
            l_out.append(first if first == lab else f"{first}..{lab}")
            e_acc = o_acc = 0.0
            first = None
    if first is not None:
        if e_out:
            e_out[-1] += e_acc
            o_out[-1] += o_acc
            head = l_out[-1].split("..")[0]
            l_out[-1] = f"{head}..{labels[-1]}"
        else:
            e_out.append(e_acc)
            o_out.append(o_acc)
            l_out.append(f"{first}..{labels[-1]}")
    return np.array(e_out), np.array(o_out), l_out


def chi_square(expected, observed, significance: float = SIGNIFICANCE) -> GofReport:
    """Pearson test of a histogram over 0..N (optionally with a final ">N" cell) against a pmf.

    The last cell collects every value past the pmf's support together with
    its missing mass, so nothing is silently dropped.
    """
    probs = _probs(expected)
    n_cells = probs.size
    hist = np.asarray(observed, dtype=float)
    if hist.size == n_cells:
        hist = np.append(hist, 0.0)
    if hist.ndim != 1 or hist.size != n_cells + 1:
        raise ParameterError("histogram length must match the pmf")
    if np.any(hist < 0):
        raise ParameterError("counts must be nonnegative")
    return _pearson(probs, hist, significance)


def chi_square_samples(expected, samples, significance: float = SIGNIFICANCE) -> GofReport:
    """As ``chi_square`` but bins integer draws first."""
    probs = _probs(expected)
    x = np.asarray(samples)
    if x.dtype.kind not in "iu" or np.any(x < 0):
        raise ParameterError("samples must be nonnegative integers")
    hist = np.bincount(np.minimum(x.ravel(), probs.size), minlength=probs.size + 1).astype(float)
    return _pearson(probs, hist, significance)


def _probs(expected) -> np.ndarray:
    probs = expected.probs if isinstance(expected, TruncatedPmf) else np.asarray(expected, dtype=float)
    if probs.ndim != 1 or probs.size < 1:
        raise ParameterError("expected pmf must be a nonempty vector")
    return probs


def _pearson(probs: np.ndarray, hist: np.ndarray, significance: float) -> GofReport:
    n_cells = probs.size
    total = hist.sum()
    if total == 0:
        raise EvaluationError("observed counts are all zero")
    if total < 1000:
        raise ParameterError(f"chi-square needs at least 1000 observations, got {int(total)}")
    cell_p = np.append(probs, max(0.0, 1.0 - probs.sum()))
    labels = [str(i) for i in range(n_cells)] + [f">={n_cells}"]
    e, o, lab = _merge_bins(cell_p * total, hist, labels)
    if e.size < 2:
        raise EvaluationError("only one cell left after merging; the test is degenerate")
    with np.errstate(divide="ignore"):
        contrib = np.where(e > 0, (o - e) ** 2 / np.where(e > 0, e, 1.0), np.where(o > 0, np.inf, 0.0))
    stat = float(contrib.sum())
    dof = int(e.size - 1)
    p = float(stats.chi2.sf(stat, dof)) if np.isfinite(stat) else 0.0
    bins = [{"cell": l, "expected": float(x), "observed": float(y)} for l, x, y in zip(lab, e, o)]
    return GofReport("chi_square", stat, dof, p, significance, int(total), bins)


def ks_statistic(samples: np.ndarray, cdf) -> float:
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = np.clip(np.asarray(cdf(x), dtype=float), 0.0, 1.0)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_test(samples, cdf, significance: float = SIGNIFICANCE) -> GofReport:
    """One-sample KS with the asymptotic Kolmogorov p-value."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 100:
        raise ParameterError("KS test needs at least 100 samples")
    d = ks_statistic(samples, cdf)
    p = float(stats.kstwobign.sf(math.sqrt(samples.size) * d))
    return GofReport("ks", d, 0, min(max(p, 0.0), 1.0), significance, int(samples.size))


def ks_two_sample(a, b, significance: float = SIGNIFICANCE) -> GofReport:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if min(a.size, b.size) < 100:
        raise ParameterError("KS test needs at least 100 samples per group")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    ne = a.size * b.size / (a.size + b.size)
    p = float(stats.kstwobign.sf(math.sqrt(ne) * d))
    return GofReport("ks2", d, 0, p, significance, int(a.size + b.size))


# ---------------------------------------------------------------------------
# accumulators


@dataclass
class Moments:
    """Running count, mean and M2 (Welford); ``merge`` is Chan's pairwise update."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, x) -> "Moments":
        x = np.asarray(x, dtype=float).ravel()
        if x.size == 0:
            return cls()
        mu = float(x.mean())
        return cls(int(x.size), mu, float(np.sum((x - mu) ** 2)))

    def push(self, v: float) -> None:
        self.n += 1
        d = v - self.mean
        self.mean += d / self.n
        self.m2 += d * (v - self.mean)

    def merge(self, other: "Moments") -> "Moments":
        if other.n == 0:
            return Moments(self.n, self.mean, self.m2)
        if self.n == 0:
            return Moments(other.n, other.mean, other.m2)
        n = self.n + other.n
        d = other.mean - self.mean
        mean = self.mean + d * other.n / n
        m2 = self.m2 + other.m2 + d * d * self.n * other.n / n
        return Moments(n, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else math.nan

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.n) if self.n > 1 else math.nan

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        se = self.stderr
        return self.mean - z * se, self.mean + z * se

    def zscore(self, target: float) -> float:
        se = self.stderr
        if not se > 0:
            return 0.0 if self.mean == target else math.inf
        return (self.mean - target) / se


def binomial_se(p_hat: float, n: int) -> float:
    return math.sqrt(max(p_hat * (1 - p_hat), 0.0) / n)
