"""Bell-polynomial machinery for high-order derivatives of composite functions.

The raw recurrences work with derivatives directly and overflow quickly.
The normalized forms work with Taylor coefficients instead.  Scaling the
m-th derivative by Lambda^m / m! turns every quantity used by the pmf code
into a probability or a rate, so nothing overflows and, for completely
monotone inputs, nothing cancels.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import comb

from ..errors import EvaluationError

RAW_ORDER_LIMIT = 40


def complete_bell(a) -> np.ndarray:
    """B_0..B_M for arguments a = (a_1, ..., a_M).

    B_{m+1} = sum_i C(m, i) B_{m-i} a_{i+1}.
    """
    a = np.asarray(a, dtype=float)
    order = a.size
    if order > RAW_ORDER_LIMIT:
        raise EvaluationError(f"raw Bell recurrence limited to order {RAW_ORDER_LIMIT}")
    b = np.zeros(order + 1)
    b[0] = 1.0
    for m in range(order):
        i = np.arange(m + 1)
        b[m + 1] = np.sum(comb(m, i) * b[m - i] * a[i])
    if not np.all(np.isfinite(b)):
        raise EvaluationError("Bell recurrence overflowed")
    return b


def partial_bell(a, n_max: int) -> np.ndarray:
    """Table B[n, j] of partial Bell polynomials B_{n,j}(a_1, a_2, ...)."""
    a = np.asarray(a, dtype=float)
    if n_max > RAW_ORDER_LIMIT:
        raise EvaluationError(f"raw Bell recurrence limited to order {RAW_ORDER_LIMIT}")
    t = np.zeros((n_max + 1, n_max + 1))
    t[0, 0] = 1.0
    for n in range(1, n_max + 1):
        for j in range(1, n + 1):
            i = np.arange(1, n - j + 2)
            t[n, j] = np.sum(comb(n - 1, i - 1) * a[i - 1] * t[n - i, j - 1])
    return t


def exp_taylor(b, s=1.0, m_max: int | None = None) -> np.ndarray:
    """Coefficients c_m of exp(s * sum_{i>=1} b_i u^i), i.e. normalized complete Bell values.

    ``b[i]`` is the coefficient of u^i (b[0] is ignored).  With b_i the
    Taylor coefficients lam^i g^(i)/i! this returns lam^m/m! * B_m(s g', s g'', ...).
    ``s`` may be an array, in which case the result has shape (m_max+1,) + s.shape.
    """
    b = np.asarray(b, dtype=float)
    if m_max is None:
        m_max = b.size - 1
    s = np.asarray(s, dtype=float)
    coef = np.zeros((m_max + 1,) + s.shape)
    coef[0] = 1.0
    w = np.zeros(m_max + 1)
    upto = min(b.size, m_max + 1)
    w[1:upto] = np.arange(1, upto) * b[1:upto]
    for m in range(m_max):
        # (m+1) c_{m+1} = s * sum_{i=1}^{m+1} i b_i c_{m+1-i}
        i = np.arange(1, m + 2)
        coef[m + 1] = s * np.tensordot(w[i], coef[m + 1 - i], axes=(0, 0)) / (m + 1)
    return coef


def reciprocal_taylor(c0: float, b, m_max: int) -> np.ndarray:
    """Coefficients of 1 / (c0 - sum_{i>=1} b_i y^i), by h_m = (1/c0) sum_i b_i h_{m-i}."""
    b = np.asarray(b, dtype=float)
    h = np.zeros(m_max + 1)
    h[0] = 1.0 / c0
    for m in range(1, m_max + 1):
        i = np.arange(1, min(m, b.size - 1) + 1)
        h[m] = np.dot(b[i], h[m - i]) / c0
    return h


def power_table(b, z_max: int, j_max: int | None = None) -> np.ndarray:
    """Table P[j, z] = [u^z] (sum_i b_i u^i)^j / j!, the normalized partial Bell values."""
    b = np.asarray(b, dtype=float)
    if j_max is None:
        j_max = z_max
    base = np.zeros(z_max + 1)
    upto = min(b.size, z_max + 1)
    base[1:upto] = b[1:upto]
    p = np.zeros((j_max + 1, z_max + 1))
    p[0, 0] = 1.0
    for j in range(1, j_max + 1):
        p[j, j:] = np.convolve(p[j - 1], base)[j:z_max + 1] / j
    return p


def derivative_of_exp(phi, s: float, order: int) -> float:
    """(-1)^m d^m/dx^m exp(-s g(x)) / exp(-s g(x)) from phi_i = (-1)^(i+1) g^(i)(x).

    Raw form, kept for cross-checks at low order.
    """
    phi = np.asarray(phi, dtype=float)[:order]
    return float(complete_bell(s * phi)[order])


def log_factorial(m: int) -> float:
    return math.lgamma(m + 1)
