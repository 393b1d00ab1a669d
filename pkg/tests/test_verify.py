import math

import numpy as np
import pytest

from patchcraft.noise import bilinear_autocov
from patchcraft.rng import Rng
from patchcraft.verify import (
    check_lemma11,
    check_rho_bound,
    check_rho_equalities,
    mc_delta,
    mc_syr_scenarios,
    rho_bound,
    rho_exact,
    rho_exact_bilinear,
    rho_separable,
    toeplitz_identity_check,
)


def test_rho_exact_white_noise_is_one():
    # white noise: only the zero lag contributes, n^2 terms of 1/n^2
    def autocov(t1, t2):
        return 25.0 if t1 == 0 and t2 == 0 else 0.0

    for n in (1, 3, 8):
        assert abs(rho_exact(n, autocov, 5.0) - 1.0) < 1e-12


def test_rho_exact_equals_separable_reduction():
    sigma = 1.0
    for n in (2, 5, 9):
        for theta in (1.5, 2, 3.7):
            # R(t1, t2) = g(t1) g(t2) with g(t) = R(t, 0) / sigma
            g = lambda t: bilinear_autocov(t, 0, theta, sigma) / sigma
            full = rho_exact(n, lambda t1, t2: bilinear_autocov(t1, t2, theta, sigma), sigma)
            fast = rho_separable(n, g, sigma)
            assert abs(full - fast) < 1e-10


def test_rho_bound_closed_form():
    assert rho_bound(5, 1) == 1.0
    assert rho_bound(4, 4) == 0.25 * (4 + 0.25) ** 2
    assert rho_bound(2, 7.9) == 0.25 * (2 + 0.5) ** 2  # r = min(n, floor(theta))
    with pytest.raises(ValueError):
        rho_bound(0, 1)


def test_rho_equality_endpoints_small():
    report = check_rho_equalities(n_max=8)
    assert report["passed"]
    assert report["max_gap"] < 1e-9


def test_rho_bound_grid_small():
    report = check_rho_bound(n_max=6, theta_max=6)
    assert report["passed"]


def test_toeplitz_identity():
    rng = Rng(1)
    for n in (1, 2, 7, 16):
        values = rng.uniform(2 * n - 1) * 4 - 2
        assert toeplitz_identity_check(n, lambda t: values[t + n - 1]) < 1e-10
    report = check_lemma11(trials=50, n_max=16)
    assert report["passed"]


def test_mc_delta_bias_and_variance():
    n, sigma = 8, 10.0
    rep = mc_delta(n, 2, sigma, np.zeros((n, n)), 20000, Rng(2))
    assert abs(rep.bias_est - 2 * sigma ** 2) < 3 * rep.bias_se
    assert abs(rep.var_est - rep.var_bound) < 0.08 * rep.var_bound
    with pytest.raises(ValueError):
        mc_delta(n, 2, sigma, np.zeros((n, n)), 100, Rng(2))
    with pytest.raises(ValueError):
        mc_delta(n, 2, sigma, np.zeros((n, 3)), 20000, Rng(2))


def test_mc_delta_nonzero_content_stays_above_bound():
    n, sigma = 8, 10.0
    diff = Rng(3).normal((n, n), sigma=6.0)
    rep = mc_delta(n, 2, sigma, diff, 20000, Rng(4))
    assert rep.delta_x > 0
    assert rep.var_est >= rep.var_bound - 3 * rep.var_se


def test_mc_syr_independent_location_and_symmetry():
    rep = mc_syr_scenarios("independent", 96, 10.0, 2000, Rng(5))
    assert abs(rep.mean + 100.0) < 3 * rep.mean_se
    assert abs(rep.skewness) < 0.25
    assert abs(rep.excess_kurtosis) < 0.5


def test_mc_syr_dependency_shifts():
    rep1 = mc_syr_scenarios("type1", 64, 10.0, 1500, Rng(6))
    assert abs(rep1.mean - (30.0 - 100.0)) < 3 * rep1.mean_se
    rep2 = mc_syr_scenarios("type2", 64, 10.0, 1500, Rng(7))
    assert abs(rep2.mean - (-50.0 - 100.0)) < 3 * rep2.mean_se
    with pytest.raises(ValueError):
        mc_syr_scenarios("type3", 64, 10.0, 1500, Rng(8))
    with pytest.raises(ValueError):
        mc_syr_scenarios("type1", 64, 10.0, 1500, Rng(9), cov_zw=2500.0)
