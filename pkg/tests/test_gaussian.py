import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from corrbounds import gaussian as gs


def test_planted_cov_and_inverse():
    S = gs.planted_cov((2, 4), 0.3, 5)
    assert S[1, 3] == S[3, 1] == 0.3
    np.testing.assert_allclose(gs.planted_inverse((2, 4), 0.3, 5), np.linalg.inv(S), atol=1e-14)
    assert abs(np.linalg.det(S) - gs.planted_det(0.3)) <= 1e-12


def test_pair_validation():
    with pytest.raises(ValueError):
        gs.planted_cov((1, 1), 0.1, 3)
    with pytest.raises(ValueError):
        gs.planted_cov((1, 4), 0.1, 3)
    with pytest.raises(ValueError):
        gs.planted_cov((1, 2), 1.0, 3)


def test_max_stack_sigma_root():
    s = gs.max_stack_sigma()
    assert s * s + 200 * s - 1 == pytest.approx(0.0, abs=1e-15)
    assert s == pytest.approx(0.004999875, abs=1e-9)


def test_density_ratio_against_scipy():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 4))
    sigma = 0.35
    planted = stats.multivariate_normal(np.zeros(4), gs.planted_cov((1, 3), sigma, 4))
    base = stats.multivariate_normal(np.zeros(4), np.eye(4))
    np.testing.assert_allclose(gs.log_density_ratio(x, (1, 3), sigma), planted.logpdf(x) - base.logpdf(x),
                               atol=1e-12)


def test_distinct_pair_moment_is_one():
    assert gs.high_order_closed([(1, 2), (3, 4)], 0.2, 4) == pytest.approx(1.0, abs=1e-12)
    assert gs.high_order_closed([(1, 2), (1, 3)], 0.2, 3) == pytest.approx(1.0, abs=1e-12)


def test_same_pair_moment_against_quadrature():
    sigma = 0.3
    assert gs.same_pair_moment((1, 2), sigma, 2) == pytest.approx(1 / (1 - sigma**2), abs=1e-10)

    def f(y, x):
        pt = np.array([[x, y]])
        return math.exp(2 * gs.log_density_ratio(pt, (1, 2), sigma)[0]) * math.exp(-(x * x + y * y) / 2) / (2 * math.pi)

    value, _ = integrate.dblquad(f, -12, 12, -12, 12, epsabs=1e-12)
    assert value == pytest.approx(1 / (1 - sigma**2), abs=1e-8)


def test_triangle_moment_against_quadrature():
    # a cycle of three pairs is the first non-trivial case; second route: tensor Gauss-Hermite
    sigma, pairs = 0.25, [(1, 2), (2, 3), (1, 3)]
    nodes, weights = np.polynomial.hermite_e.hermegauss(60)
    grid = np.array(list(itertools.product(nodes, repeat=3)))
    w = np.prod(np.array(list(itertools.product(weights, repeat=3))), axis=1) / (2 * math.pi) ** 1.5
    f = np.exp(sum(gs.log_density_ratio(grid, I, sigma) for I in pairs))
    assert gs.high_order_closed(pairs, sigma, 3) == pytest.approx(float(w @ f), abs=1e-10)


def test_divergent_moment_rejected():
    with pytest.raises(ArithmeticError):
        gs.high_order_closed([(1, 2)] * 8, 0.6, 2)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_unique_coordinate_zero(d):
    pairs = list(itertools.combinations(range(1, d + 1), 2))
    for r in range(1, 5):
        for combo in itertools.combinations_with_replacement(pairs, r):
            if gs.has_unique_coordinate(combo):
                assert abs(gs.centered_high_order_closed(combo, 0.2, d)) <= 1e-10


def test_has_unique_coordinate():
    assert gs.has_unique_coordinate([(1, 2), (2, 3)])
    assert not gs.has_unique_coordinate([(1, 2), (2, 3), (1, 3)])
    assert not gs.has_unique_coordinate([(1, 2), (1, 2)])


def test_cycle_centered_moment_positive():
    assert gs.centered_high_order_closed([(1, 2), (2, 3), (1, 3)], 0.2, 3) > 0


def test_stack_bounds():
    s = gs.max_stack_sigma() * 0.999
    st_ = gs.stack_build([(1, 2), (2, 3), (3, 4), (1, 4), (1, 3)], s, 4)
    assert st_.det <= 2 and np.max(np.abs(st_.matrix)) <= 2
    np.testing.assert_allclose(st_.matrix @ st_.precision, np.eye(4), atol=1e-12)


def test_stack_rejections():
    with pytest.raises(ValueError):
        gs.stack_build([(1, 2), (2, 3)], 0.01, 4)
    with pytest.raises(ValueError):
        gs.stack_build([(1, 2), (1, 2)], 0.001, 4)
    with pytest.raises(ValueError):
        gs.stack_build([(1, 2)], 0.001, 4)


@settings(max_examples=100, deadline=None)
@given(st.integers(4, 12), st.integers(2, 5), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_stack_property(d, r, frac, seed):
    pairs = list(itertools.combinations(range(1, d + 1), 2))
    rng = np.random.default_rng(seed)
    combo = [pairs[i] for i in rng.choice(len(pairs), size=r, replace=False)]
    stack = gs.stack_build(combo, frac * gs.max_stack_sigma(), d)
    assert stack.det <= 2 and np.max(np.abs(stack.matrix)) <= 2


def test_mc_matches_closed_form():
    pairs = [(1, 2), (2, 3), (1, 3)]
    exact = gs.high_order_closed(pairs, 0.2, 4)
    est, se = gs.mc_high_order(pairs, 0.2, 4, 200_000, 7)
    assert abs(est - exact) <= 3 * se
    est, se = gs.mc_centered_high_order([(1, 2), (2, 3)], 0.2, 4, 200_000, 8)
    assert abs(est) <= 3 * se


def test_mc_minimum_draws():
    with pytest.raises(ValueError):
        gs.mc_high_order([(1, 2)], 0.1, 3, 100, 0)


def test_gauss_tail_bounds_true_tail():
    for w in (0.5, 1.0, 2.0, 4.0):
        assert 2 * stats.norm.sf(w) <= gs.gauss_tail(w)
    assert 2 * stats.norm.sf(3, scale=2) <= gs.gauss_tail(3, 4.0)


def test_norm_cdf():
    x = np.array([-40.0, -3.0, 0.0, 2.0])
    np.testing.assert_allclose(gs.norm_cdf(x), stats.norm.cdf(x), rtol=1e-12, atol=0)


def test_truncation_params():
    tc = gs.truncation_params(4, 1, 1, 0.001)
    assert tc.R >= 1
    assert tc.escape_bound() <= min(1 / 2, tc.p, 0.001)
    assert tc.escape_bound() == pytest.approx(4 * math.exp(-tc.R**2 / 2))


def test_box_mass_against_quadrature():
    sigma, R = 0.4, 1.5
    value = gs.box_mass((1, 2), sigma, R, 3)
    cov = gs.planted_cov((1, 2), sigma, 2)
    mvn = stats.multivariate_normal(np.zeros(2), cov)
    pair, _ = integrate.dblquad(lambda y, x: mvn.pdf([x, y]), -R, R, -R, R, epsabs=1e-12)
    one = stats.norm.cdf(R) - stats.norm.cdf(-R)
    assert value == pytest.approx(pair * one, abs=1e-9)


def test_truncated_rho_formula():
    s, R = 0.01, 2.0
    assert gs.truncated_rho(s, R) == pytest.approx(2 * s * s / (1 - s * s) + 4 * s * R * R / (1 - s * s) ** 2 + 2 * s)


def test_truncated_ratio_within_bound():
    tc = gs.truncation_params(4, 1, 1, 0.001)
    check = gs.truncated_ratio_check((1, 2), 0.001, tc.R, 4, 20_000, 3)
    assert check.passed
    assert check.points == 20_004


def test_truncated_ratio_gate():
    tc = gs.truncation_params(4, 1, 1, 0.01)
    assert 0.01 * tc.R**2 / (1 - 0.01**2) > 1
    with pytest.raises(ValueError):
        gs.truncated_ratio_check((1, 2), 0.01, tc.R, 4, 100, 0)


def test_sample_planted_covariance():
    x = gs.sample_planted((2, 3), 0.5, 4, 200_000, 1)
    c = np.cov(x.T)
    assert abs(c[1, 2] - 0.5) < 0.01
    assert abs(c[0, 1]) < 0.01


@pytest.mark.parametrize("sigma", [0.01, 0.1, 0.5, 0.9])
def test_planted_inverse_identity(sigma):
    for d in (2, 7, 16):
        S = gs.planted_cov((1, d), sigma, d)
        np.testing.assert_allclose(S @ gs.planted_inverse((1, d), sigma, d), np.eye(d), atol=1e-12)


def test_corner_ratio_prefactor():
    # the normalising constant of a bivariate density is (1 - sigma^2)^(-1/2)
    sigma, R = 0.01, 3.0
    corner = np.array([[R, R, 0.0], [R, -R, 0.0]])
    planted = stats.multivariate_normal(np.zeros(3), gs.planted_cov((1, 2), sigma, 3))
    base = stats.multivariate_normal(np.zeros(3), np.eye(3))
    expect = planted.pdf(corner) / base.pdf(corner)
    got = np.exp(gs.log_density_ratio(corner, (1, 2), sigma))
    np.testing.assert_allclose(got, expect, rtol=1e-12)
    sign = np.array([1.0, -1.0])
    quad = (2 * sigma**2 * R**2 - 2 * sigma * R**2 * sign) / (2 * (1 - sigma**2))
    np.testing.assert_allclose(got, (1 - sigma**2) ** -0.5 * np.exp(-quad), rtol=1e-12)


def test_truncated_ratio_sigma_zero():
    check = gs.truncated_ratio_check((1, 2), 0.0, 3.0, 4, 500, 0)
    assert check.deviation <= 1e-12 and check.bound == 0.0 and check.passed


def test_box_mass_edges():
    R = 2.0
    one = stats.norm.cdf(R) - stats.norm.cdf(-R)
    assert gs.box_mass((1, 2), 0.0, R, 4) == pytest.approx(one**4, abs=1e-12)
    assert gs.box_mass((1, 3), 0.5, 40.0, 3) == pytest.approx(1.0, abs=1e-12)


def test_box_mass_against_monte_carlo():
    x = gs.sample_planted((1, 2), 0.2, 3, 10**6, 21)
    inside = np.all(np.abs(x) <= 2.5, axis=1)
    se = inside.std() / math.sqrt(len(inside))
    assert abs(inside.mean() - gs.box_mass((1, 2), 0.2, 2.5, 3)) <= 3 * se


def test_sample_planted_sigma_zero_independent():
    x = gs.sample_planted((1, 2), 0.0, 3, 200_000, 2)
    c = np.corrcoef(x.T)
    assert np.all(np.abs(c - np.eye(3)) < 3 * 3 / math.sqrt(200_000))
