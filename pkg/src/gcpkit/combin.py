"""Compositions of n into parts 1..k and weighted sums over them.

Two evaluation paths are provided.  ``enumerate_omega`` and
``omega_weighted_sum`` walk the index set explicitly.  ``convolution_powers``
and ``omega_coefficients`` compute the same sums for all n at once by
grouping on the number of parts z, which is what the pmf code uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import ParameterError

MAX_N = 10_000


@dataclass(frozen=True)
class Composition:
    """Multiplicities (x_1, ..., x_k) with sum_j j*x_j = n."""

    parts: tuple[int, ...]

    @property
    def n(self) -> int:
        return sum((j + 1) * x for j, x in enumerate(self.parts))

    @property
    def weight_order(self) -> int:
        """Number of parts, sum_j x_j."""
        return sum(self.parts)


def _check_kn(k: int, n: int) -> None:
    if int(k) != k or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k!r}")
    if int(n) != n or n < 0:
        raise ParameterError(f"n must be a nonnegative integer, got {n!r}")
    if n > MAX_N:
        raise ParameterError(f"n={n} exceeds the supported maximum {MAX_N}")


@lru_cache(maxsize=4096)
def count_omega(k: int, n: int) -> int:
    """Number of partitions of n into parts of size at most k."""
    _check_kn(k, n)
    ways = [1] + [0] * n
    for j in range(1, k + 1):
        for m in range(j, n + 1):
            ways[m] += ways[m - j]
    return ways[n]


def enumerate_omega(k: int, n: int) -> list[Composition]:
    """All solutions of sum_j j*x_j = n with x_j >= 0.

    The multiplicity of the largest part is chosen first, then the next
    largest and so on, each in increasing order.  For k=2, n=2 this gives
    (2,0) then (0,1).
    """
    _check_kn(k, n)
    out: list[Composition] = []
    parts = [0] * k

    def descend(j: int, remaining: int) -> None:
        if j == 1:
            parts[0] = remaining
            out.append(Composition(tuple(parts)))
            return
        for x in range(remaining // j + 1):
            parts[j - 1] = x
            descend(j - 1, remaining - j * x)
        parts[j - 1] = 0

    descend(k, n)
    return out


def log_weight(c: Composition, log_lam: np.ndarray) -> float:
    """log of prod_j lam_j^x_j / x_j!."""
    x = np.asarray(c.parts, dtype=float)
    return float(np.dot(x, log_lam) - gammaln(x + 1.0).sum())


def omega_weighted_sum(k: int, n: int, lam: Sequence[float],
                       g: Callable[[int], float]) -> float:
    """sum over compositions of prod_j lam_j^x_j/x_j! * g(z).

    Weights are formed in log space so large n or large rates do not
    overflow; g is called once per distinct number of parts.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (k,):
        raise ParameterError(f"expected {k} rates, got {lam.shape}")
    if np.any(lam <= 0):
        raise ParameterError("rates must be positive")
    log_lam = np.log(lam)
    cache: dict[int, float] = {}
    terms = []
    for c in enumerate_omega(k, n):
        z = c.weight_order
        if z not in cache:
            cache[z] = float(g(z))
        gz = cache[z]
        if gz == 0.0:
            continue
        terms.append(math.exp(log_weight(c, log_lam)) * gz)
    return math.fsum(terms)


def convolution_powers(probs: Sequence[float], n_max: int,
                       z_max: int | None = None) -> np.ndarray:
    """Table Q[z, n] = Pr(X_1 + ... + X_z = n) for iid X on {1, 2, ...}.

    ``probs[j-1]`` is Pr(X = j); the vector may be shorter than n_max and
    need not sum to one.  Rows are built by repeated convolution truncated
    at n_max.  All entries are nonnegative, so there is no cancellation.
    """
    probs = np.asarray(probs, dtype=float)
    if z_max is None:
        z_max = n_max
    base = np.zeros(n_max + 1)
    m = min(len(probs), n_max)
    base[1:m + 1] = probs[:m]
    q = np.zeros((z_max + 1, n_max + 1))
    q[0, 0] = 1.0
    for z in range(1, z_max + 1):
        # parts are >= 1, so row z vanishes below n = z
        q[z, z:] = np.convolve(q[z - 1], base)[z:n_max + 1]
    return q


def omega_coefficients(lam: Sequence[float], n_max: int) -> np.ndarray:
    """Table C[n, z] = sum over compositions of n with z parts of prod lam^x/x!.

    Computed as Lambda^z/z! * Pr(S_z = n) where S_z sums z jumps drawn
    with probabilities lam_j/Lambda.
    """
    lam = np.asarray(lam, dtype=float)
    total = lam.sum()
    q = convolution_powers(lam / total, n_max)
    z = np.arange(n_max + 1)
    scale = np.exp(z * math.log(total) - gammaln(z + 1.0))
    return (q * scale[:, None]).T
