import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st
from scipy import integrate, special

from gcpkit.errors import InfiniteMomentError, ParameterError
from gcpkit.harness.stats import Moments, ks_test, ks_two_sample
from gcpkit.subordinators import (BernsteinFn, StabilityProfile, SubordinatorPath, bernstein_deriv,
                                  bernstein_eval, gamma_increment, inverse_path,
                                  inverse_stable_density, inverse_stable_marginal,
                                  inverse_stable_rule, multistable_path, multistable_terminal,
                                  slice_power_integral, stable_increment, subordinator_path)

GAMMA = BernsteinFn.gamma(1.0, 2.0)
STABLE = BernsteinFn.stable(0.5)


def test_values_at_zero_and_hand_derivatives():
    assert bernstein_eval(GAMMA, 0.0) == 0.0 and bernstein_eval(STABLE, 0.0) == 0.0
    assert bernstein_deriv(GAMMA, 1, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert bernstein_deriv(STABLE, 2, 4.0) == pytest.approx(-0.03125, rel=1e-15)


@pytest.mark.parametrize("f,expr", [
    (BernsteinFn.gamma(1.3, 0.7), lambda s: sp.Rational(7, 10) * sp.log(1 + s / sp.Rational(13, 10))),
    (BernsteinFn.stable(0.6), lambda s: s ** sp.Rational(3, 5)),
])
def test_closed_form_derivatives_against_sympy(f, expr):
    s = sp.Symbol("s", positive=True)
    e = expr(s)
    for m in range(0, 9):
        d = sp.diff(e, s, m)
        for x in (0.1, 0.9, 3.0, 10.0):
            assert f.deriv(m, x) == pytest.approx(float(d.subs(s, x)), rel=1e-12)


@pytest.mark.parametrize("f", [BernsteinFn.gamma(1.0, 1.0), BernsteinFn.stable(0.7)])
def test_derivatives_against_high_order_differences(f):
    import mpmath as mp

    for m in range(1, 6):
        for x in (0.1, 1.0, 10.0):
            with mp.workdps(40):
                ref = mp.diff(lambda v: f.b * mp.log(1 + v / f.a) if f.family == "gamma" else v ** f.beta, x, m)
            assert f.deriv(m, x) == pytest.approx(float(ref), rel=1e-6)


@given(st.floats(0.05, 20.0), st.integers(1, 12))
def test_complete_monotonicity_signs(s, m):
    for f in (GAMMA, STABLE, BernsteinFn.stable(0.9)):
        assert f.alt_deriv(m, s) >= 0


@given(st.floats(0.0, 30.0), st.floats(0.0, 30.0))
def test_nondecreasing(s1, s2):
    lo, hi = sorted((s1, s2))
    for f in (GAMMA, STABLE):
        assert f(lo) <= f(hi)


def test_custom_family_derivatives():
    exact = BernsteinFn.gamma(1.0, 1.0)
    analytic = BernsteinFn.custom(lambda s: np.log1p(s))
    assert not analytic.approximate
    real_only = BernsteinFn.custom(lambda s: math.log1p(s))
    assert real_only.approximate
    for m in range(1, 6):
        assert analytic.deriv(m, 1.5) == pytest.approx(exact.deriv(m, 1.5), rel=1e-10)
    for m in range(1, 4):
        assert real_only.deriv(m, 1.5) == pytest.approx(exact.deriv(m, 1.5), rel=1e-5)
    with pytest.raises(ParameterError):
        analytic.deriv(61, 1.0)


@pytest.mark.parametrize("f", [BernsteinFn.gamma(1.0, 1.0), BernsteinFn.stable(0.6),
                               BernsteinFn.custom(lambda s: np.sqrt(1 + s) - 1)])
def test_poisson_jump_rates_follow_derivatives_and_telescope(f):
    lam, n = 1.7, 30
    rates = f.poisson_jump_rates(lam, n)
    assert rates[0] == 0 and np.all(rates >= 0)
    for i in (1, 2, 7):
        assert rates[i] == pytest.approx(f.alt_deriv(i, lam) * lam**i / math.factorial(i), rel=1e-9)
    assert rates.sum() + f.poisson_jump_tail(lam, n) == pytest.approx(f(lam), rel=1e-10)


def test_parse_grammar():
    assert BernsteinFn.parse("gamma:a=1,b=2") == GAMMA
    assert BernsteinFn.parse("gamma:1,2") == GAMMA
    assert BernsteinFn.parse("stable:beta=0.5") == STABLE
    assert BernsteinFn.parse("stable:0.5").describe() == "stable:beta=0.5"
    for bad in ("stable:1.2", "gamma:a=1", "weird:1", "stable:beta=x", "gamma:0,1"):
        with pytest.raises(ParameterError):
            BernsteinFn.parse(bad)


def test_moments_declared():
    assert GAMMA.mean(3.0) == 6.0 and GAMMA.variance(3.0) == 6.0
    with pytest.raises(InfiniteMomentError):
        STABLE.mean()
    with pytest.raises(InfiniteMomentError):
        BernsteinFn.custom(np.log1p).variance()


# -- samplers -----------------------------------------------------------------

def test_stable_laplace_transform(rng):
    beta, s, t = 0.6, 1.0, 1.0
    d = stable_increment(beta, t, rng, 100000)
    assert np.all(d > 0)
    assert abs(Moments.of(np.exp(-s * d)).zscore(math.exp(-t * s**beta))) < 4


def test_half_stable_is_levy(rng):
    t = 1.3
    d = stable_increment(0.5, t, rng, 50000)
    assert ks_test(d, lambda x: special.erfc(t / (2 * np.sqrt(x)))).passed


def test_stable_self_similarity(rng):
    beta, dt = 0.7, 0.3
    a = stable_increment(beta, 4 * dt, rng, 20000)
    b = 4 ** (1 / beta) * stable_increment(beta, dt, rng, 20000)
    assert ks_two_sample(a, b).passed


def test_gamma_increment_moments_and_laplace(rng):
    a, b, dt = 1.5, 2.0, 0.7
    x = gamma_increment(a, b, dt, rng, 100000)
    m = Moments.of(x)
    assert abs(m.zscore(b * dt / a)) < 4
    assert m.variance == pytest.approx(b * dt / a**2, rel=0.03)
    f = BernsteinFn.gamma(a, b)
    assert abs(Moments.of(np.exp(-2.0 * x)).zscore(math.exp(-dt * f(2.0)))) < 4


def test_sampler_argument_checks(rng):
    with pytest.raises(ParameterError):
        stable_increment(1.0, 1.0, rng)
    with pytest.raises(ParameterError):
        gamma_increment(1.0, 1.0, 0.0, rng)
    with pytest.raises(ParameterError):
        inverse_stable_marginal(0.5, -1.0, rng)


@pytest.mark.parametrize("alpha", [0.6, 0.9])
def test_inverse_stable_marginal_moments(alpha, rng):
    t = 2.0
    y = inverse_stable_marginal(alpha, t, rng, 200000)
    mean = t**alpha / math.gamma(alpha + 1)
    var = (2 / math.gamma(2 * alpha + 1) - 1 / math.gamma(alpha + 1) ** 2) * t ** (2 * alpha)
    assert abs(Moments.of(y).zscore(mean)) < 4
    # standard error of the sample variance from the fourth moment
    m4 = math.factorial(4) / math.gamma(4 * alpha + 1) * t ** (4 * alpha)
    m3 = math.factorial(3) / math.gamma(3 * alpha + 1) * t ** (3 * alpha)
    m2 = 2 / math.gamma(2 * alpha + 1) * t ** (2 * alpha)
    c4 = m4 - 4 * m3 * mean + 6 * m2 * mean**2 - 3 * mean**4
    se = math.sqrt((c4 - var**2) / y.size)
    assert abs(np.var(y, ddof=1) - var) < 4 * se
    assert inverse_stable_marginal(alpha, 0.0, rng, 3).tolist() == [0.0, 0.0, 0.0]


@pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
def test_inverse_stable_density_normalizes_and_has_the_mean(alpha):
    t = 1.7
    mass, _ = integrate.quad(lambda x: inverse_stable_density(alpha, t, x), 0, np.inf, limit=400, epsabs=1e-12)
    mean, _ = integrate.quad(lambda x: x * inverse_stable_density(alpha, t, x), 0, np.inf, limit=400, epsabs=1e-12)
    assert mass == pytest.approx(1.0, abs=1e-8)
    assert mean == pytest.approx(t**alpha / math.gamma(alpha + 1), abs=1e-6)


def test_inverse_stable_density_laplace_in_time():
    alpha, x, s = 0.6, 0.5, 1.0
    val, _ = integrate.quad(lambda t: math.exp(-s * t) * inverse_stable_density(alpha, t, x), 0, np.inf,
                            limit=400, epsabs=1e-12)
    assert val == pytest.approx(s ** (alpha - 1) * math.exp(-x * s**alpha), abs=1e-4)


def test_inverse_stable_density_vectorized():
    xs = np.array([0.0, 0.3, 1.2, 4.0])
    vec = inverse_stable_density(0.7, 1.1, xs)
    assert np.allclose(vec, [inverse_stable_density(0.7, 1.1, v) for v in xs], rtol=1e-10)


@pytest.mark.parametrize("alpha", [0.5, 0.7, 0.9])
def test_inverse_stable_rule_reproduces_moments(alpha):
    rule = inverse_stable_rule(alpha)
    for n in range(0, 6):
        assert rule.moment_error(n) < 1e-10


# -- paths ------------------------------------------------------------------------

def test_inverse_of_identity_path():
    x = np.linspace(0, 5, 5001)
    path = SubordinatorPath(x, x.copy(), x[1])
    grid = np.array([0.0, 0.25, 1.0, 3.3])
    assert np.allclose(inverse_path(path, grid).values, grid, atol=1e-12)


def test_inverse_of_inverse(rng):
    path = subordinator_path(GAMMA, 5.0, 1e-3, rng)
    t = np.linspace(0.0, 0.95 * path.values[-1], 4000)
    inv = inverse_path(path, t)
    assert np.all(np.diff(inv.values) >= 0)
    x = np.linspace(0.5, 4.0, 30)
    x = x[x < inv.values[-1]]
    back = inverse_path(inv, x).values
    # error budget: one cell of the time grid plus the path increment around x
    slack = (t[1] - t[0]) + path.value(x + path.dt) - path.value(x - path.dt) + 1e-12
    assert np.all(np.abs(back - path.value(x)) <= slack)


def test_inverse_needs_long_enough_path(rng):
    path = subordinator_path(GAMMA, 1.0, 0.01, rng)
    with pytest.raises(ParameterError):
        inverse_path(path, [path.values[-1] + 1.0])


def test_path_inverse_matches_marginal_law(rng):
    alpha, t = 0.7, 1.0
    ys = []
    for _ in range(2000):
        path = subordinator_path(BernsteinFn.stable(alpha), 8.0, 2e-3, rng)
        ys.append(inverse_path(path, [t]).values[0])
    direct = inverse_stable_marginal(alpha, t, rng, 20000)
    assert ks_two_sample(np.array(ys), direct).passed


def test_subordinator_paths_are_nondecreasing(rng):
    for f in (GAMMA, STABLE):
        p = subordinator_path(f, 2.0, None, rng)
        assert p.values[0] == 0 and np.all(np.diff(p.values) >= 0)


# -- multistable ---------------------------------------------------------------------

def test_profile_validation():
    with pytest.raises(ParameterError):
        StabilityProfile.linear(0.5, 0.6).validate(1.0)
    with pytest.raises(ParameterError):
        StabilityProfile.parse("quadratic:1,2")
    assert StabilityProfile.parse("linear:0.4,0.3")(1.0) == pytest.approx(0.7)


def test_constant_profile_matches_stable(rng):
    h, _ = multistable_terminal(StabilityProfile.constant(0.6), 1.0, 0.05, rng, 20000)
    direct = stable_increment(0.6, 1.0, rng, 20000)
    assert ks_two_sample(h, direct).passed


def test_multistable_laplace_functional(rng):
    profile, u, T = StabilityProfile.linear(0.4, 0.3), 1.0, 1.0
    h, dt = multistable_terminal(profile, T, 0.02, rng, 100000)
    exact = math.exp(-profile.power_integral(u, T))
    sliced = math.exp(-slice_power_integral(profile, u, T, dt))
    m = Moments.of(np.exp(-u * h))
    # u = 1 makes every slice exponent equal to its width, so there is no slicing bias here
    assert exact == pytest.approx(sliced, abs=1e-12)
    assert abs(m.zscore(exact)) < 4
    u2 = 2.0
    m2 = Moments.of(np.exp(-u2 * h))
    bias = abs(math.exp(-profile.power_integral(u2, T)) - math.exp(-slice_power_integral(profile, u2, T, dt)))
    assert abs(m2.mean - math.exp(-profile.power_integral(u2, T))) < 4 * m2.stderr + bias


def test_multistable_path_nondecreasing(rng):
    p = multistable_path(StabilityProfile.linear(0.4, 0.3), 1.0, None, rng)
    assert p.values[0] == 0 and np.all(np.diff(p.values) >= 0)
    assert p.dt * 0.3 < 0.01


def test_profile_jump_rates_match_constant_case():
    rates = StabilityProfile.constant(0.6).poisson_jump_rates(1.5, 10, 2.0)
    np.testing.assert_allclose(rates, 2.0 * BernsteinFn.stable(0.6).poisson_jump_rates(1.5, 10), rtol=1e-11)
