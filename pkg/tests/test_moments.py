import math

import numpy as np
import pytest
from scipy import integrate

from gcpkit.errors import InfiniteMomentError, ParameterError
from gcpkit.gcp_core import GcpParams
from gcpkit.harness.stats import Moments
from gcpkit.subordinators import BernsteinFn, inverse_stable_marginal
from gcpkit.timechange import (inverse_stable_cov, inverse_stable_mean, inverse_stable_variance,
                               lrd_constant, lrd_estimate, mfa_moments, mfa_sample_joint, tcgcp_sample_counts)
from gcpkit.timechange.moments import count_moments_unit, inverse_stable_joint

GAMMA = BernsteinFn.gamma(1.0, 1.0)
P2 = GcpParams((1.0, 1.0))
GRID = np.logspace(1, 3, 7)


def second_moment_integral(alpha, s, t):
    """E Y(s)Y(t) from the renewal-type integral over the first clock, by quadrature."""
    c = 1 / (math.gamma(1 + alpha) * math.gamma(alpha))
    val, _ = integrate.quad(lambda u: ((t - u) ** alpha + (s - u) ** alpha) * u ** (alpha - 1), 0, s,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return c * val


@pytest.mark.parametrize("alpha", [0.6, 0.9])
@pytest.mark.parametrize("s,t", [(0.5, 0.5), (1.0, 2.5), (2.0, 30.0)])
def test_inverse_stable_cov_against_integral(alpha, s, t):
    ref = second_moment_integral(alpha, s, t) - inverse_stable_mean(alpha, s) * inverse_stable_mean(alpha, t)
    assert inverse_stable_cov(alpha, s, t) == pytest.approx(ref, rel=1e-9)


def test_cov_on_the_diagonal_is_variance():
    for alpha in (0.3, 0.6, 0.9):
        assert inverse_stable_cov(alpha, 1.7, 1.7) == pytest.approx(inverse_stable_variance(alpha, 1.7), rel=1e-12)
    assert inverse_stable_cov(1.0, 1.0, 2.0) == 0.0
    with pytest.raises(ParameterError):
        inverse_stable_cov(0.5, 2.0, 1.0)


def test_inverse_stable_moments_against_draws(rng):
    alpha, t = 0.6, 2.0
    y = inverse_stable_marginal(alpha, t, rng, 200000)
    m = Moments.of(y)
    assert abs(m.zscore(float(inverse_stable_mean(alpha, t)))) < 4
    dev2 = (y - y.mean()) ** 2
    assert abs(dev2.mean() - inverse_stable_variance(alpha, t)) < 4 * dev2.std() / math.sqrt(y.size)


def test_joint_clock_covariance(rng):
    alpha, s, t = 0.7, 1.0, 3.0
    y = inverse_stable_joint(alpha, [s, t], rng, 100000)
    prod = (y[:, 0] - y[:, 0].mean()) * (y[:, 1] - y[:, 1].mean())
    assert abs(prod.mean() - inverse_stable_cov(alpha, s, t)) < 4 * prod.std() / math.sqrt(y.shape[0]) + 0.01


def test_unit_moments_against_sampling(rng):
    q1, q2 = count_moments_unit(GAMMA, P2)
    assert q1 == pytest.approx(3.0) and q2 == pytest.approx(9.0 + 5.0)
    draws = tcgcp_sample_counts(GAMMA, P2, 1.0, 200000, rng).astype(float)
    assert abs(Moments.of(draws).zscore(q1)) < 4


def test_overdispersion():
    t = np.linspace(0.1, 50, 40)
    for alpha in (0.6, 0.9, 1.0):
        mom = mfa_moments(GAMMA, P2, alpha, 0.1, t)
        assert np.all(mom.var > mom.mean)


def test_order_near_one_limit():
    t = np.array([0.5, 2.0, 8.0])
    mom = mfa_moments(GAMMA, P2, 0.999, 0.5, t)
    np.testing.assert_allclose(mom.mean, mom.q1 * t, rtol=1e-2)
    exact = mfa_moments(GAMMA, P2, 1.0, 0.5, t)
    np.testing.assert_allclose(exact.mean, exact.q1 * t, rtol=1e-14)
    np.testing.assert_allclose(exact.var, exact.q2 * t, rtol=1e-14)


def test_stable_clock_has_no_moments():
    with pytest.raises(InfiniteMomentError):
        mfa_moments(BernsteinFn.stable(0.5), P2, 0.7, 1.0, 2.0)


def test_mean_and_variance_against_sampling(rng):
    alpha, s, t = 0.7, 1.0, 4.0
    mom = mfa_moments(GAMMA, P2, alpha, s, t)
    x = mfa_sample_joint(GAMMA, P2, alpha, [s, t], rng, 100000).astype(float)
    assert abs(Moments.of(x[:, 1]).zscore(float(mom.mean))) < 4
    dev2 = (x[:, 1] - x[:, 1].mean()) ** 2
    # the graded clock grid overshoots Y by under 1% of its value
    assert abs(dev2.mean() - mom.var) < 4 * dev2.std() / math.sqrt(x.shape[0]) + 0.02 * mom.var


def test_sampled_times_are_nondecreasing(rng):
    x = mfa_sample_joint(GAMMA, P2, 0.6, [0.5, 1.0, 2.0], rng, 2000)
    assert np.all(np.diff(x, axis=1) >= 0)


def test_asymptotic_constant():
    alpha, s = 0.7, 1.0
    c = lrd_constant(GAMMA, P2, alpha, s)
    assert c > 0
    t = np.array([1e5, 1e7])
    mom = mfa_moments(GAMMA, P2, alpha, s, t)
    np.testing.assert_allclose(mom.corr * t**alpha, c, rtol=1e-2)


@pytest.mark.parametrize("alpha", [0.6, 0.7, 0.8])
def test_analytic_slope_on_last_decade(alpha):
    est = lrd_estimate(GAMMA, P2, alpha, 1.0, GRID)
    assert -alpha - 0.05 <= est.analytic_slope <= -alpha + 0.05
    assert est.fit_window == (100.0, 1000.0)


def test_slope_approaches_exponent_slowly_near_one():
    # the leading correction decays like t^(alpha - 1), so alpha near 1 needs a much later window
    near = lrd_estimate(GAMMA, P2, 0.9, 1.0, GRID).analytic_slope
    far = lrd_estimate(GAMMA, P2, 0.9, 1.0, np.logspace(6, 8, 7)).analytic_slope
    assert abs(far + 0.9) < 0.01 < abs(near + 0.9)


def test_mc_slope(rng):
    est = lrd_estimate(GAMMA, P2, 0.7, 1.0, GRID, n_paths=20000, rng=rng)
    assert abs(est.mc_slope + 0.7) < 0.1
    assert est.n_paths == 20000 and est.mc_corr.shape == GRID.shape


def test_lrd_argument_checks():
    with pytest.raises(ParameterError):
        lrd_estimate(GAMMA, P2, 0.7, 1.0, [10.0, 100.0])
    with pytest.raises(ParameterError):
        lrd_estimate(GAMMA, P2, 0.7, 20.0, GRID)
