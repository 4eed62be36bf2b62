import math

import numpy as np
import pytest
from scipy import integrate, stats

from gcpkit.errors import DivergentSeriesError, ParameterError
from gcpkit.gcp_core import GcpParams
from gcpkit.harness.stats import Moments
from gcpkit.orderstats import (TfnbParams, kth_order_mc, kth_order_stfpp, kth_order_tfnb, stfpp_pmf,
                               tfnb_factorial_moment, tfnb_pgf, tfnb_pmf, tfnb_pmf_value, tfnb_pmf_vector)
from gcpkit.timechange import gfcp_pmf, gstfcp_sample, tcgfcp_sample

REF = TfnbParams(0.5, 1.0, 1.0, 0.6)


def nb_pmf(p: TfnbParams, n, t):
    # with beta = 1 the count is Poisson at a gamma(b t, a) time
    return stats.nbinom.pmf(n, p.b * t, p.a / (p.a + p.lam))


def test_params_validation():
    with pytest.raises(ParameterError):
        TfnbParams(0.5, 1.0, 1.0, 1.5)
    with pytest.raises(ParameterError):
        TfnbParams(-0.5, 1.0, 1.0, 0.5)
    with pytest.raises(DivergentSeriesError):
        tfnb_pmf(TfnbParams(2.0, 1.0, 1.0, 0.6), 0, 1.0)


@pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
def test_order_one_is_negative_binomial(t):
    p = TfnbParams(0.7, 1.5, 2.0, 1.0)
    # the float series is certified to 1e-12 absolute per state
    np.testing.assert_allclose(tfnb_pmf_vector(p, t, 25), nb_pmf(p, np.arange(26), t), rtol=1e-9, atol=1e-12)
    assert tfnb_pgf(p, 0.3, t) == pytest.approx((p.a / (p.a + p.lam * 0.7)) ** (p.b * t), rel=1e-12)


@pytest.mark.parametrize("p", [REF, TfnbParams(0.8, 2.0, 0.5, 0.8)])
def test_pmf_normalizes(p):
    for t in (0.5, 2.0):
        assert math.fsum(tfnb_pmf_vector(p, t, 150)) == pytest.approx(1.0, abs=1e-8)


def test_pmf_at_zero_is_pgf_at_zero():
    assert tfnb_pmf(REF, 0, 1.0) == pytest.approx(tfnb_pgf(REF, 0.0, 1.0), rel=1e-12)


@pytest.mark.parametrize("n", [0, 1, 3, 6])
def test_pmf_against_fractional_poisson_at_gamma_time(n):
    # Q(t) = N_beta(D(t)): integrate the fractional Poisson law against the gamma density
    p = REF
    one = GcpParams((p.lam,))
    dens = stats.gamma(p.b * 1.0, scale=1 / p.a).pdf
    val, _ = integrate.quad(lambda s: gfcp_pmf(one, p.beta, s, n_max=n)[n] * dens(s) if s > 0 else 0.0,
                            0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
    assert tfnb_pmf(p, n, 1.0) == pytest.approx(val, rel=1e-7, abs=1e-12)


def test_high_precision_route_takes_over_under_cancellation():
    p = TfnbParams(0.95, 1.0, 4.0, 0.5)
    v = tfnb_pmf_value(p, 10, 6.0)
    assert v.route == "mpmath"
    assert 0 <= v.value <= 1


def test_pgf_properties():
    assert tfnb_pgf(REF, 1.0, 2.0) == 1.0
    pm = tfnb_pmf_vector(REF, 1.0, 150)
    for u in (-0.6, 0.2, 0.8):
        assert tfnb_pgf(REF, u, 1.0) == pytest.approx(np.polynomial.polynomial.polyval(u, pm), abs=1e-9)
    with pytest.raises(ParameterError):
        tfnb_pgf(REF, 1.2, 1.0)


def test_factorial_moments():
    t = 1.7
    bt = REF.b * t
    first = REF.lam * math.gamma(bt + REF.beta) / (math.gamma(REF.beta + 1) * REF.a**REF.beta * math.gamma(bt))
    assert tfnb_factorial_moment(REF, 1, t) == pytest.approx(first, rel=1e-13)
    nb = TfnbParams(0.5, 2.0, 1.0, 1.0)
    for m in (1, 2, 4):
        rising = math.prod(bt + i for i in range(m))
        assert tfnb_factorial_moment(nb, m, t) == pytest.approx(nb.lam**m * rising / nb.a**m, rel=1e-12)
    vals = [tfnb_pmf_value(REF, n, t) for n in range(80)]
    n = np.arange(80)
    w = n * (n - 1)
    summed = float(np.array([v.value for v in vals]) @ w)
    bound = float(np.array([v.error for v in vals]) @ w)
    assert abs(tfnb_factorial_moment(REF, 2, t) - summed) <= bound + 1e-10
    with pytest.raises(ParameterError):
        tfnb_factorial_moment(REF, 0, t)


def test_factorial_moment_against_sampling(rng):
    f, p = REF.as_process()
    q = tcgfcp_sample(f, p, REF.beta, 1.0, 200000, rng).astype(float)
    assert abs(Moments.of(q * (q - 1)).zscore(tfnb_factorial_moment(REF, 2, 1.0))) < 4


# -- STFPP -----------------------------------------------------------------------------

def test_stfpp_reductions():
    lam, t = 0.9, 1.4
    pois = stats.poisson.pmf(np.arange(10), lam * t)
    np.testing.assert_allclose([stfpp_pmf(1.0, 1.0, lam, n, t) for n in range(10)], pois, rtol=1e-12)
    frac = gfcp_pmf(GcpParams((lam,)), 0.7, t, n_max=10).probs
    np.testing.assert_allclose([stfpp_pmf(0.7, 1.0, lam, n, t) for n in range(11)], frac, rtol=1e-9, atol=1e-14)
    assert stfpp_pmf(0.5, 0.5, 0.0, 0, 1.0) == 1.0
    with pytest.raises(ParameterError):
        stfpp_pmf(1.5, 0.5, 1.0, 0, 1.0)


def test_stfpp_state_zero_and_mass():
    alpha, beta, lam, t = 0.9, 0.7, 0.5, 1.0
    from gcpkit.specfun import mittag_leffler

    assert stfpp_pmf(alpha, beta, lam, 0, t) == pytest.approx(mittag_leffler(alpha, 1, -(lam**beta) * t**alpha),
                                                              rel=1e-12)
    probs = [stfpp_pmf(alpha, beta, lam, n, t) for n in range(40)]
    assert all(0 <= v <= 1 for v in probs) and sum(probs) <= 1 + 1e-12


# -- order statistics --------------------------------------------------------------------

def test_full_cdf_value_gives_one():
    for k in (1, 2, 4):
        lhs, rhs = kth_order_tfnb(REF, k, 1.0, 1.0)
        assert lhs == pytest.approx(1.0, abs=1e-12) and rhs == pytest.approx(1.0, abs=1e-12)
        lhs, rhs = kth_order_stfpp(0.9, 0.7, 0.5, k, 1.0, 1.0)
        assert lhs == pytest.approx(1.0, abs=1e-12) and rhs == pytest.approx(1.0, abs=1e-12)


def test_tfnb_identity_reference_point():
    lhs, rhs = kth_order_tfnb(REF, 1, 0.5, 1.0)
    assert abs(lhs - rhs) < 1e-7


def test_stfpp_identity_reference_point():
    lhs, rhs = kth_order_stfpp(0.9, 0.7, 0.5, 2, 0.5, 1.0)
    assert abs(lhs - rhs) < 1e-7


@pytest.mark.parametrize("k", [1, 3])
@pytest.mark.parametrize("t", [0.5, 2.0])
def test_identity_holds_off_reference(k, t):
    for F in (0.1, 0.6, 0.95):
        lhs, rhs = kth_order_tfnb(REF, k, F, t)
        assert abs(lhs - rhs) < 1e-7
        lhs, rhs = kth_order_stfpp(0.6, 0.5, 0.5, k, F, t)
        assert abs(lhs - rhs) < 1e-7


def test_conditional_cdf_increases_with_f():
    vals = [kth_order_tfnb(REF, 2, F, 1.0)[0] for F in np.linspace(0, 1, 11)]
    assert vals[0] == pytest.approx(0.0, abs=1e-12) and np.all(np.diff(vals) >= -1e-12)


def test_order_checks():
    with pytest.raises(ParameterError):
        kth_order_tfnb(REF, 0, 0.5, 1.0)
    with pytest.raises(ParameterError):
        kth_order_stfpp(0.9, 0.7, 0.5, 1, 1.5, 1.0)


def test_mc_confirms_tfnb_identity(rng):
    f, p = REF.as_process()
    sizes = tcgfcp_sample(f, p, REF.beta, 1.0, 200000, rng)
    est, se = kth_order_mc(sizes, 2, 0.5, rng)
    assert abs(est - kth_order_tfnb(REF, 2, 0.5, 1.0)[1]) < 4 * se


def test_mc_confirms_stfpp_identity(rng):
    sizes = gstfcp_sample(GcpParams((0.5,)), 0.9, 0.7, 1.0, 200000, rng)
    est, se = kth_order_mc(sizes, 2, 0.5, rng)
    assert abs(est - kth_order_stfpp(0.9, 0.7, 0.5, 2, 0.5, 1.0)[1]) < 4 * se
