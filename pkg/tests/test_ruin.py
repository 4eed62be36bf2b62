import math
import warnings

import numpy as np
import pytest
from scipy import stats

from gcpkit.errors import ParameterError
from gcpkit.gcp_core import GcpParams
from gcpkit.harness.stats import ks_test
from gcpkit.ruin import (ClaimDist, RiskModel, k0y, k_mc, lundberg_exponent, mixer, mixer_cdf, psi0,
                         ruin_mc, ruin_ode_residual, safety_loading, simulate_ladders)
from gcpkit.subordinators import BernsteinFn

GAMMA = BernsteinFn.gamma(1.0, 1.0)
P2 = GcpParams((1.0, 1.0))
EXP1 = ClaimDist.exponential(1.0)
REF = RiskModel(4.0, EXP1, GAMMA, P2)
IDENTITY = BernsteinFn.custom(lambda s: s, label="identity", mean=1.0, variance=0.0)


def test_claim_parsing_and_validation():
    assert ClaimDist.parse("exp:2").mean == 0.5
    assert ClaimDist.parse("det:3").mean == 3.0
    lat = ClaimDist.parse("lattice:0.5:0,0.25,0.75")
    assert lat.mean == pytest.approx(0.5 * (0.25 + 1.5))
    for bad in ("exp:-1", "lattice:1:0.5,0.5", "pareto:2", "exp", "lattice:1:0,0.3"):
        with pytest.raises(ParameterError):
            ClaimDist.parse(bad)
    with pytest.raises(ParameterError):
        RiskModel(0.0, EXP1, GAMMA, P2)


def test_safety_loading():
    assert safety_loading(RiskModel(3.0, EXP1, GAMMA, P2)) == pytest.approx(0.0, abs=1e-15)
    assert safety_loading(REF) == pytest.approx(1 / 3)
    a, b = safety_loading(REF) + 1, safety_loading(RiskModel(8.0, EXP1, GAMMA, P2)) + 1
    assert b == pytest.approx(2 * a)


# -- mixer ---------------------------------------------------------------------------

def test_mixer_is_a_distribution():
    x = np.linspace(0, 60, 601)
    w = mixer_cdf(REF, x)
    assert w[0] == 0.0
    assert np.all(np.diff(w) >= -1e-15)
    assert mixer_cdf(REF, 200.0) == pytest.approx(1.0, abs=1e-6)
    mix = mixer(REF)
    assert mix.dropped < 1e-9 and mix.weights.sum() + mix.dropped == pytest.approx(1.0, abs=1e-12)


def test_mixer_single_jump_size_erlang_mixture():
    lam = 1.3
    model = RiskModel(5.0, ClaimDist.exponential(2.0), GAMMA, GcpParams((lam,)))
    fl = GAMMA(lam)
    x = np.array([0.1, 0.7, 2.0, 6.0])
    ref = np.zeros_like(x)
    # for b log(1 + s/a) the batch sizes follow a logarithmic series law
    r = lam / (1.0 + lam)
    for n in range(1, 400):
        ref += r**n / (n * fl) * stats.gamma.cdf(x, n, scale=0.5)
    np.testing.assert_allclose(mixer_cdf(model, x), ref, rtol=1e-9)


def test_mixer_with_deterministic_claims_is_a_step_function():
    model = RiskModel(4.0, ClaimDist.deterministic(1.0), GAMMA, P2)
    mix = mixer(model)
    w = np.cumsum(mix.weights)
    np.testing.assert_allclose(mix.cdf(np.array([0.5, 1.0, 2.5, 3.0])), [0.0, w[1], w[2], w[3]], rtol=1e-12)


# -- zero-capital ruin -------------------------------------------------------------------

def test_deficit_probability_basics():
    assert k0y(REF, 0.0) == 0.0
    ys = np.linspace(0, 30, 31)
    k = k0y(REF, ys)
    assert np.all(np.diff(k) >= 0) and k[-1] <= psi0(REF) + 1e-12
    np.testing.assert_allclose(k0y(REF, ys, route="closed"), k, rtol=1e-9, atol=1e-15)
    with pytest.raises(ParameterError):
        k0y(RiskModel(4.0, EXP1, GAMMA, P2, u=1.0), 1.0)


def test_large_deficit_limit_is_ruin_probability():
    # zero-capital ruin probability is 1 / (1 + loading); the truncated mixer misplaces its dropped weight
    exact = 1 / (1 + safety_loading(REF))
    slack = REF.jump_rate / REF.c * mixer(REF).dropped
    assert abs(k0y(REF, 400.0) - exact) <= 400 * slack + 1e-10
    assert abs(psi0(REF) - exact) <= 400 * slack


def test_deficit_density_is_scaled_mixer_survival():
    y, h = 1.3, 1e-4
    deriv = (k0y(REF, y + h) - k0y(REF, y - h)) / (2 * h)
    assert deriv == pytest.approx(REF.jump_rate / REF.c * (1 - mixer_cdf(REF, y)), rel=1e-6)


def test_lattice_claims_quadrature_and_closed_form():
    model = RiskModel(6.0, ClaimDist.lattice(0.5, [0.0, 0.5, 0.5]), GAMMA, P2)
    ys = np.array([0.3, 1.0, 2.75, 8.0])
    np.testing.assert_allclose(k0y(model, ys), k0y(model, ys, route="closed"), rtol=1e-8)


def test_nonpositive_loading():
    model = RiskModel(3.0, EXP1, GAMMA, P2)
    with pytest.warns(RuntimeWarning):
        k0y(model, 1.0)
    with pytest.raises(ParameterError):
        psi0(model)


def test_lundberg_exponent_classical_case():
    model = RiskModel(2.0, EXP1, IDENTITY, GcpParams((1.5,)))
    assert lundberg_exponent(model) == pytest.approx(1 - 1.5 / 2, rel=1e-10)


def test_lundberg_exponent_solves_its_equation():
    r = lundberg_exponent(REF)
    mix = mixer(REF)
    n = np.arange(mix.weights.size)
    lhs = REF.jump_rate * (np.dot(mix.weights, (1 / (1 - r)) ** n) + mix.dropped - 1)
    assert lhs == pytest.approx(REF.c * r, rel=1e-9)


# -- simulation --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def ladders():
    return simulate_ladders(REF, 200000, np.random.default_rng(7))


def test_simulated_zero_capital_ruin(ladders):
    est, se = k_mc(ladders, 0.0, [np.inf])
    assert abs(est[0] - psi0(REF)) < 3 * se[0]
    assert ladders.residual < 1e-9


def test_simulated_deficit_probability(ladders):
    ys = np.array([0.5, 1.0, 3.0, 10.0])
    est, se = k_mc(ladders, 0.0, ys)
    assert np.all(np.abs(est - k0y(REF, ys)) < 3 * se)


def test_deficit_law_at_ruin(ladders):
    ruined, deficit = ladders.first_exceedance(0.0)
    p = psi0(REF)
    assert ks_test(deficit[ruined], lambda y: k0y(REF, y, route="closed") / p).passed


def test_ruin_probability_decreases_with_capital(ladders):
    psis = [ladders.first_exceedance(u)[0].mean() for u in (0.0, 1.0, 3.0, 10.0, 30.0)]
    assert all(b <= a for a, b in zip(psis, psis[1:]))


def test_classical_ruin_probability(rng):
    # Poisson arrivals with exponential claims: psi(u) = psi(0) e^{-R u}
    model = RiskModel(2.0, EXP1, IDENTITY, GcpParams((1.5,)), u=3.0)
    est = ruin_mc(model, 1e4, 100000, rng)
    exact = 0.75 * math.exp(-0.25 * 3.0)
    assert est.ci[0] <= exact <= est.ci[1]
    assert est.deficits.size == round(est.psi * est.n_paths)
    # memorylessness: the deficit is again exponential
    assert ks_test(est.deficits, lambda y: 1 - np.exp(-y)).passed


def test_huge_premium_rarely_ruins(rng):
    est = ruin_mc(RiskModel(400.0, EXP1, GAMMA, P2), 1e3, 20000, rng)
    assert est.psi < 0.02


def test_governing_equation_residual(rng):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = ruin_ode_residual(REF, [0.5, 1.0, 2.0, 3.0, 4.0], 2.0, 100000, rng)
    assert rep.consistent()
    with pytest.raises(ParameterError):
        ruin_ode_residual(REF, [1.0], 2.0, 100, rng, form="weird")
