import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gcpkit.errors import ParameterError
from gcpkit.gcp_core import GcpParams, gcp_pmf
from gcpkit.harness.stats import Moments, chi_square_samples
from gcpkit.ngcp import RateFunctionSet, ngcp_increment_pmf
from gcpkit.specfun import mittag_leffler
from gcpkit.timechange import (gfcp_governing_check, gfcp_pgf, gfcp_pmf, gfcp_sample,
                               ngfcp_governing_residual, ngfcp_pmf)
from gcpkit.timechange.gfcp import epoch_law_ml, epoch_law_quadrature

P2 = GcpParams((1.0, 1.0))
P3 = GcpParams((0.5, 1.0, 1.5))


def epoch_oracle(total, beta, t, z):
    """Pr(N(Y_beta(t)) = z) from the power series of the m-th ML derivative, in mpmath."""
    with mp.workdps(40):
        c = mp.mpf(total) * mp.mpf(t) ** mp.mpf(beta)
        b = mp.mpf(beta)
        d = mp.nsum(lambda j: mp.rf(j + 1, z) * (-c) ** j * mp.rgamma(b * (j + z) + 1), [0, mp.inf])
        return float(c**z / mp.factorial(z) * d)


def test_state_zero_is_mittag_leffler():
    for beta in (0.5, 0.7):
        pm = gfcp_pmf(P2, beta, 1.3)
        assert pm[0] == pytest.approx(mittag_leffler(beta, 1, -2 * 1.3**beta), rel=1e-13)


def test_state_one_against_mpmath():
    beta, t = 0.6, 1.0
    pm = gfcp_pmf(P2, beta, t)
    # one unit arrives only through a single jump of size one
    assert pm[1] == pytest.approx(0.5 * epoch_oracle(2.0, beta, t, 1), rel=1e-12)


@pytest.mark.parametrize("beta", [0.5, 0.7])
def test_epoch_law_routes_agree_with_mpmath(beta):
    ml = epoch_law_ml(3.0, beta, 0.8, 12)
    quad = epoch_law_quadrature(3.0, beta, 0.8, 12)
    ref = np.array([epoch_oracle(3.0, beta, 0.8, z) for z in range(13)])
    np.testing.assert_allclose(ml, ref, rtol=1e-10, atol=1e-15)
    np.testing.assert_allclose(quad, ref, rtol=0, atol=1e-10)


@pytest.mark.parametrize("p", [P2, P3])
@pytest.mark.parametrize("beta", [0.5, 0.7])
def test_ml_and_quadrature_routes(p, beta):
    a = gfcp_pmf(p, beta, 1.0, n_max=10, method="ml")
    b = gfcp_pmf(p, beta, 1.0, n_max=10, method="quadrature")
    assert np.max(np.abs(a.probs - b.probs)) <= 1e-6


def test_order_one_is_gcp():
    a = gfcp_pmf(P3, 1.0, 1.7, n_max=30)
    np.testing.assert_allclose(a.probs, gcp_pmf(P3, 1.7, n_max=30).probs, rtol=1e-10)


@pytest.mark.parametrize("p", [P2, P3])
@pytest.mark.parametrize("beta", [0.5, 0.7])
@pytest.mark.parametrize("t", [0.2, 1.0, 3.0])
def test_normalization(p, beta, t):
    pm = gfcp_pmf(p, beta, t)
    assert pm.tail_bound < 1e-9
    assert max(pm.mass - 1, 1 - pm.mass - pm.tail_bound, 0) <= 1e-9


def test_high_states_fall_back_to_quadrature():
    pm = gfcp_pmf(P2, 0.7, 8.0, n_max=60)
    assert any("quadrature" in note for note in pm.notes)
    ref = gfcp_pmf(P2, 0.7, 8.0, n_max=60, method="quadrature")
    assert np.max(np.abs(pm.probs - ref.probs)) < 1e-9


def test_time_zero_and_argument_checks():
    assert gfcp_pmf(P2, 0.6, 0.0)[0] == 1.0
    with pytest.raises(ParameterError):
        gfcp_pmf(P2, 1.5, 1.0)
    with pytest.raises(ParameterError):
        gfcp_pmf(P2, 0.5, 1.0, method="magic")
    with pytest.raises(ParameterError):
        gfcp_pgf(P2, 0.5, 2.0, 1.0)


@settings(max_examples=15)
@given(st.floats(-1.0, 1.0), st.sampled_from([0.5, 0.7]))
def test_pgf_matches_pmf(u, beta):
    pm = gfcp_pmf(P3, beta, 1.0)
    series = np.polynomial.polynomial.polyval(u, pm.probs)
    assert abs(series - gfcp_pgf(P3, beta, u, 1.0)) <= pm.tail_bound + 1e-12


@pytest.mark.parametrize("beta", [0.5, 0.7])
def test_sampler_law(beta, rng):
    draws = gfcp_sample(P2, beta, 1.0, 100000, rng)
    assert chi_square_samples(gfcp_pmf(P2, beta, 1.0), draws).passed


def test_sampler_mean(rng):
    beta, t = 0.7, 2.0
    draws = gfcp_sample(P3, beta, t, 100000, rng)
    mean = P3.mean_rate * t**beta / math.gamma(1 + beta)
    assert abs(Moments.of(draws).zscore(mean)) < 4


def test_mc_route(rng):
    pm = gfcp_pmf(P2, 0.6, 1.0, n_max=15, method="mc", rng=rng, sims=50000)
    ref = gfcp_pmf(P2, 0.6, 1.0, n_max=15)
    assert np.max(np.abs(pm.probs - ref.probs)) < 0.01


# -- governing equations -------------------------------------------------------------

def test_fractional_residual_single_jump_size():
    t = np.arange(0, 1001) * 1e-3
    rep = gfcp_governing_check(GcpParams((1.0,)), 0.7, t, n_max=8)
    assert rep.passed(5e-3)


@pytest.mark.parametrize("beta", [0.5, 0.7])
def test_fractional_residual_two_jump_sizes(beta):
    t = np.arange(0, 1001) * 1e-3
    assert gfcp_governing_check(P2, beta, t, n_max=8).passed(5e-3)


def test_state_zero_is_caputo_eigenfunction():
    t = np.arange(0, 1001) * 1e-3
    rep = gfcp_governing_check(P3, 0.6, t, n_max=0)
    assert rep.residuals.shape[1] == 1 and rep.passed(5e-3)


def test_order_one_residual_is_classical():
    t = np.linspace(0.1, 2.0, 201)
    assert gfcp_governing_check(P2, 1.0, t, n_max=10).max_residual < 1e-6


# -- non-homogeneous fractional process --------------------------------------------------

def test_ngfcp_constant_rates_reduce():
    r = RateFunctionSet.constant(P2.lam)
    for beta in (0.5, 0.7):
        a = ngfcp_pmf(r, beta, 1.2, v=0.7, n_max=20).probs
        b = gfcp_pmf(P2, beta, 1.2, n_max=20).probs
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-10)


def test_ngfcp_order_one_is_ngcp():
    r = RateFunctionSet.parse(["linear:1", "constant:1"])
    a = ngfcp_pmf(r, 1.0, 1.0, v=0.0, n_max=20).probs
    np.testing.assert_allclose(a, ngcp_increment_pmf(r, 1.0, 0.0, 20).probs, rtol=1e-14)


def test_ngfcp_normalizes():
    r = RateFunctionSet.parse(["linear:1", "constant:1"])
    pm = ngfcp_pmf(r, 0.6, 1.5, v=0.5)
    assert pm.tail_bound < 1e-9
    assert max(pm.mass - 1, 1 - pm.mass - pm.tail_bound, 0) <= 1e-9


def test_ngfcp_governing_residual_linear_rates():
    r = RateFunctionSet.parse(["linear:1", "linear:0.5,1"])
    t = np.arange(0, 1001) * 1e-3
    assert ngfcp_governing_residual(r, 0.7, t, n_max=8).passed(5e-3)


def test_ngfcp_matches_composition_mc(rng):
    # sample Y_beta(t), then the non-homogeneous increment over [v, v + Y]
    from gcpkit.subordinators import inverse_stable_marginal

    r = RateFunctionSet.parse(["linear:1", "constant:1"])
    beta, t, v = 0.6, 1.0, 0.5
    y = inverse_stable_marginal(beta, t, rng, 100000)
    win = r.window_many(y, v)
    draws = rng.poisson(win[:, 0]) + 2 * rng.poisson(win[:, 1])
    assert chi_square_samples(ngfcp_pmf(r, beta, t, v), draws).passed
