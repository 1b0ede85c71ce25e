import math

import numpy as np
import pytest
from numpy.polynomial import hermite_e

from fourthmoment import fbm_lab as FB
from fourthmoment.chaos_eval import estimate
from fourthmoment.rng import RandomStream


def test_fbm_cov_examples():
    assert FB.fbm_cov(1, 1, 0.3) == 1.0
    assert FB.fbm_cov(0.7, 0, 0.35) == 0.0
    assert FB.fbm_cov(2, 1, 0.35) == pytest.approx(0.5 * 2**0.7, abs=1e-12)
    assert FB.fbm_cov(2, 3, 0.2) == FB.fbm_cov(3, 2, 0.2)


def test_increment_corr():
    assert FB.increment_corr(0, 0.35) == 1.0
    assert FB.increment_corr(1, 0.5) == 0.0
    assert FB.increment_corr(1, 0.35) == pytest.approx(0.5 * (2**0.7 - 2), abs=1e-14)
    j = np.arange(1, 200)
    assert np.all(FB.increment_corr(j, 0.35) < 0)
    direct = 0.5 * ((j + 1.0) ** 0.7 - 2 * j**0.7 + (j - 1.0) ** 0.7)
    np.testing.assert_allclose(FB.increment_corr(j, 0.35), direct, rtol=1e-9)
    big = 1e6
    assert abs(FB.increment_corr(big, 0.35)) * big**1.3 == pytest.approx(0.35 * 0.3, rel=1e-5)


def test_increments_have_fbm_covariance():
    cfg = FB.FbmConfig(0.35, n=64, paths=20_000, seed=2)
    x = FB.simulate_paths(cfg)
    b = np.cumsum(x, axis=1) * cfg.n ** -0.35
    for i, j in ((15, 31), (63, 63), (7, 40)):
        s, t = (i + 1) / 64, (j + 1) / 64
        c = estimate(b[:, i] * b[:, j])
        assert c.within(FB.fbm_cov(s, t, 0.35))


def test_brownian_case_is_iid():
    cfg = FB.FbmConfig(0.5, n=4096, paths=1)
    x = FB.simulate_increments(cfg).x
    assert abs(np.mean(x[:-1] * x[1:])) < 4 / math.sqrt(len(x))


def test_lag1_estimate_matches():
    cfg = FB.FbmConfig(0.35, n=2048, paths=200, seed=5)
    est = FB._lag1_estimate(FB.simulate_paths(cfg))
    assert est.within(FB.increment_corr(1, 0.35))


def test_paths_are_deterministic_and_addressable():
    cfg = FB.FbmConfig(0.35, n=128, paths=6, seed=9)
    a = FB.simulate_paths(cfg)
    assert np.array_equal(a, FB.simulate_paths(cfg))
    assert np.array_equal(a[4], FB.simulate_increments(cfg, path_id=4).x)


def test_cholesky_budget():
    with pytest.raises(ValueError):
        FB.simulate_paths(FB.FbmConfig(0.35, n=FB.CHOLESKY_BUDGET + 1, paths=1))


def test_power_variation_examples():
    cfg = FB.FbmConfig(0.5, kappa=3, n=256, paths=3)
    x = FB.simulate_paths(cfg)
    assert np.all(FB.power_variation(x, cfg, 0.5 / 256) == 0)
    assert FB.power_variation(np.ones(256), cfg, 1.0) == pytest.approx(16.0)
    z_half = FB.power_variation(x, cfg, 0.5)
    rest = (x[:, 128:] ** 3).sum(axis=1) / 16
    np.testing.assert_allclose(FB.power_variation(x, cfg, 1.0), z_half + rest, rtol=1e-12)
    with pytest.raises(ValueError):
        FB.power_variation(x, cfg, 1.5)


def test_kappa_one_brownian_is_standard_normal():
    cfg = FB.FbmConfig(0.5, kappa=1, n=256, paths=4000, seed=1)
    z = FB.power_variation(FB.simulate_paths(cfg), cfg, 1.0)
    var, se = FB._var_estimate(z)
    assert abs(var - 1.0) < 4 * se


@pytest.mark.parametrize("kappa,expected", [(1, {1: 1}), (3, {1: 3, 3: 1}), (5, {1: 15, 3: 10, 5: 1})])
def test_hermite_power_examples(kappa, expected):
    assert FB.hermite_power_decomp(kappa).coeffs == expected


def test_hermite_power_matches_polynomial_identity():
    for kappa in range(1, 22, 2):
        d = FB.hermite_power_decomp(kappa)
        series = [0.0] * (kappa + 1)
        for m, b in d.coeffs.items():
            series[m] = b
        mono = hermite_e.herme2poly(series)
        np.testing.assert_allclose(mono, [0.0] * kappa + [1.0], atol=1e-6)
        assert d.parseval() == FB.double_factorial(2 * kappa - 1)
        assert d.normalized_coeffs()[1] == d.coeffs[1]


def test_hermite_power_validation():
    for bad in (2, 0, 23):
        with pytest.raises(ValueError):
            FB.hermite_power_decomp(bad)


def test_mehler_moment():
    s = RandomStream(4, 0)
    for i, rho in enumerate((-0.5, 0.0, 0.7)):
        z = s.substream(i).normals(400_000).reshape(-1, 2)
        y = rho * z[:, 0] + math.sqrt(1 - rho * rho) * z[:, 1]
        assert estimate(z[:, 0] ** 3 * y**3).within(FB.pair_power_moment(3, rho))


def test_limit_constants_kappa_one():
    c = FB.limit_constants(0.35, 1)
    assert c.c_sq_twosided == pytest.approx(0.0, abs=1e-12)
    assert c.c_sq_onesided == pytest.approx(0.5, abs=1e-12)


def test_limit_constants_kappa_three():
    c = FB.limit_constants(0.35, 3)
    s3, J, tail = FB.rho_power_sum(0.35, 3)
    assert tail < 1e-10 and c.truncation[3] == J
    assert c.c_sq_twosided == pytest.approx(6 * (1 + 2 * s3), rel=1e-12)
    assert c.sigma_sq[1] == pytest.approx(0.0, abs=1e-12)
    assert sum(c.sigma_sq.values()) == pytest.approx(c.c_sq_twosided, abs=1e-9)
    assert sum(c.sigma_sq_onesided.values()) == pytest.approx(c.c_sq_onesided, abs=1e-9)
    assert c.c_sq_direct_twosided == pytest.approx(c.c_sq_twosided, abs=1e-8)
    assert c.c_sq_direct_onesided == pytest.approx(c.c_sq_onesided, abs=1e-8)
    assert c.c_sq_gap == pytest.approx(c.c_sq_onesided - c.c_sq_twosided)


def test_brownian_constants_equal():
    c = FB.limit_constants(0.5, 3)
    assert c.c_sq_twosided == c.c_sq_onesided == 15.0


def test_tail_bound_is_an_upper_bound():
    for h in (0.1, 0.35, 0.45):
        for m in (2, 3):
            J = 50
            lags = np.arange(J + 1, 2_000_000)
            actual = float(np.sum(np.abs(FB.increment_corr(lags, h)) ** m))
            assert actual <= FB.lag_tail_bound(h, m, J)


def test_ergodic_stat_first_chaos_is_deterministic():
    cfg = FB.FbmConfig(0.35, 3, 256, paths=5)
    x = FB.simulate_paths(cfg)
    v = FB.ergodic_derivative_stat(x, 1, 0.0, 1.0, cfg)
    assert np.all(v == v[0])
    idx = np.arange(256)
    rho = FB.increment_corr(np.abs(idx[:, None] - idx[None, :]), 0.35)
    assert v[0] == pytest.approx(9 / 256 * rho.sum(), rel=1e-10)


def test_ergodic_stat_brownian_cases():
    cfg = FB.FbmConfig(0.5, 3, 1024, paths=500, seed=3)
    x = FB.simulate_paths(cfg)
    c = FB.limit_constants(0.5, 3)
    assert np.all(FB.ergodic_derivative_stat(x, 2, 0, 1, cfg) == 0)
    assert estimate(FB.ergodic_derivative_stat(x, 3, 0, 1, cfg)).within(3 * c.sigma_sq[3])


def test_ergodic_stat_third_chaos():
    cfg = FB.FbmConfig(0.35, 3, 1024, paths=500, seed=4)
    x = FB.simulate_paths(cfg)
    c = FB.limit_constants(cfg)
    assert estimate(FB.ergodic_derivative_stat(x, 3, 0, 1, cfg)).within(3 * c.sigma_sq[3])


def test_ergodic_stat_validation():
    cfg = FB.FbmConfig(0.35, 3, 64, paths=1)
    x = FB.simulate_paths(cfg)
    for m, a, b in ((0, 0, 1), (4, 0, 1), (3, 0.5, 0.5), (3, 0, 2)):
        with pytest.raises(ValueError):
            FB.ergodic_derivative_stat(x, m, a, b, cfg)


def test_config_validation():
    for kwargs in ({"hurst": 0.6}, {"hurst": 0.0}, {"hurst": 0.3, "kappa": 4}, {"hurst": 0.3, "n": 0}):
        with pytest.raises(ValueError):
            FB.FbmConfig(**kwargs)
    assert not FB.FbmConfig(0.5).theorem_regime and FB.FbmConfig(0.35).theorem_regime


# exact finite-n companions --------------------------------------------------

def test_finite_n_variance_matches_mc():
    cfg = FB.FbmConfig(0.35, 3, 512, paths=3000, seed=6)
    z = FB.power_variation(FB.simulate_paths(cfg), cfg, 1.0)
    var, se = FB._var_estimate(z)
    assert abs(var - sum(FB.finite_n_variance(cfg).values())) < 4 * se


def test_finite_n_first_chaos_closed_form():
    for n in (256, 1024, 4096):
        v = FB.finite_n_variance(FB.FbmConfig(0.35, 3, n, paths=1))
        assert v[1] == pytest.approx(9 * n ** (2 * 0.35 - 1), rel=1e-9)


def test_variance_bridge_favours_two_sided():
    c = FB.limit_constants(0.35, 3)
    v3 = [FB.finite_n_variance(FB.FbmConfig(0.35, 3, n, paths=1))[3] for n in (256, 1024, 4096, 16384)]
    gaps = [abs(v - c.c_sq_twosided) for v in v3]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-4
    total = sum(FB.finite_n_variance(FB.FbmConfig(0.35, 3, 8192, paths=1)).values())
    assert abs(total - c.c_sq_twosided) < abs(total - c.c_sq_onesided)


def test_kappa_one_variance_decays_at_exact_rate():
    v = [sum(FB.finite_n_variance(FB.FbmConfig(0.35, 1, n, paths=1)).values()) for n in (512, 2048)]
    assert v[1] / v[0] == pytest.approx(4 ** (2 * 0.35 - 1), rel=1e-9)


def test_finite_n_level_correlation():
    cfg = FB.FbmConfig(0.35, 3, 1024, paths=3000, seed=8)
    x = FB.simulate_paths(cfg)
    z, b = FB.power_variation(x, cfg, 1.0), FB.fbm_level(x, cfg, 1.0)
    assert estimate(b * z).within(FB.finite_n_cov_level(cfg))
    assert FB.finite_n_cov_level(cfg) == pytest.approx(3 * 1024 ** (0.35 - 0.5), rel=1e-9)


def test_step2_table_is_bounded():
    cfg = FB.FbmConfig(0.35, 3, 256, paths=400, seed=1)
    rows = FB.step2_table(FB.simulate_paths(cfg), cfg)
    assert len(rows) == 2 + 4 + 8 + 16
    decomp = FB.hermite_power_decomp(3)
    rho = np.abs(FB.increment_corr(np.arange(1, 100_000), 0.35))
    bound = sum(b * b * math.factorial(m) * (1 + 2 * np.sum(rho**m)) for m, b in decomp.coeffs.items())
    assert max(r[3] for r in rows) <= bound


def test_joint_experiment_summary_keys():
    res = FB.joint_experiment(FB.FbmConfig(0.35, 3, 128, paths=200, seed=2), ergodic_paths=50)
    s = res.summary
    for key in ("level_variances", "rho1", "variance", "independence", "ks", "ergodic", "step2", "step2_max_ratio"):
        assert key in s
    assert set(s["ergodic"]) == {1, 3}
    assert res.level.shape == res.power_variation.shape == (200,)


def test_path_bits_independent_of_request_shape():
    cfg = FB.FbmConfig(0.35, n=64, paths=200, seed=1)
    full = FB.simulate_paths(cfg)
    assert np.array_equal(full[70:135], FB.simulate_paths(cfg, first=70, count=65))
    assert np.array_equal(full[199], FB.simulate_increments(cfg, path_id=199).x)
