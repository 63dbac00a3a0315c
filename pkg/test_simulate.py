"""数据生成测试脚本。

用 scipy.special.gamma 与 statsmodels 的 ARMA 工具作为独立参照，检查分数积分系数、
MA 展开、自协方差和模拟器的确定性。
"""
import io

import numpy as np
from scipy.signal import lfilter
from scipy.special import gamma
from statsmodels.tsa.arima_process import arma2ma, arma_acovf
from statsmodels.tsa.stattools import acf

from ellipsar.errors import DomainError, NonstationaryError, TruncationError
from ellipsar.simulate import (
    ArfimaSpec,
    SeriesSample,
    ShortMemorySpec,
    ar_to_ma,
    arfima_noise_filter,
    autocovariance,
    char_root_check,
    fractional_coeffs,
    linear_ma_coeffs,
    short_memory_coeffs,
    simulate,
    simulate_arfima,
    simulate_short_memory,
)


def test_fractional_coeffs_match_gamma_ratio():
    j = np.arange(0, 51)
    for d in (-0.3, 0.1, 0.49):
        oracle = gamma(j + d) / (gamma(d) * gamma(j + 1))
        assert np.allclose(fractional_coeffs(d, 50), oracle, rtol=1e-10, atol=0)


def test_fractional_coeffs_reject_nonstationary_d():
    for d in (0.5, -0.5, 0.7):
        try:
            fractional_coeffs(d, 10)
        except DomainError:
            continue
        raise AssertionError(f"d={d} 应当被拒绝")
    assert np.array_equal(fractional_coeffs(0.0, 5), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0])


def test_short_memory_coeffs_are_positive_and_decreasing():
    spec = ShortMemorySpec(total_mass=0.99, true_order=100)
    phi = short_memory_coeffs(spec).entries
    assert phi.shape == (100,)
    assert np.isclose(phi.sum(), 0.99, rtol=1e-14)
    assert np.all(phi > 0) and np.all(np.diff(phi) < 0)


def test_linear_ma_coeffs():
    assert np.allclose(linear_ma_coeffs(5), [1.0, 0.9, 0.8, 0.7, 0.6, 0.5])
    assert ArfimaSpec(ar=ShortMemorySpec(total_mass=0.5, true_order=3)).ma_order == 5


def test_char_root_check():
    ok = char_root_check([0.5])
    assert ok.passes and np.isclose(ok.min_modulus, 2.0)
    assert not char_root_check([1.0]).passes
    assert not char_root_check([0.6, 0.5]).passes
    assert char_root_check([0.0, 0.0]).passes
    complex_case = char_root_check([1.0, -0.5])
    assert complex_case.passes and complex_case.has_complex_roots
    for k0 in (100, 1000):
        for phi_bar in (0.75, 0.99):
            assert char_root_check(short_memory_coeffs(ShortMemorySpec(total_mass=phi_bar, true_order=k0))).passes
    persistent = char_root_check(short_memory_coeffs(ShortMemorySpec(total_mass=0.99, true_order=100)))
    assert persistent.passes and persistent.has_complex_roots


def test_ar_to_ma_inverts_polynomial():
    phi = short_memory_coeffs(ShortMemorySpec(total_mass=0.9, true_order=7)).entries
    psi = ar_to_ma(phi, 200)
    product = np.convolve(np.concatenate(([1.0], -phi)), psi)[:201]
    identity = np.zeros(201)
    identity[0] = 1.0
    assert np.allclose(product, identity, rtol=0, atol=1e-12)
    oracle = arma2ma(np.concatenate(([1.0], -phi)), np.array([1.0]), lags=201)
    assert np.allclose(psi, oracle, rtol=0, atol=1e-12)


def test_ar_to_ma_rejects_unit_root():
    try:
        ar_to_ma([0.5, 0.5], 10)
    except NonstationaryError:
        return
    raise AssertionError("单位根应当被拒绝")


def test_autocovariance_ar1_closed_form():
    a, sigma = 0.6, 1.3
    gam = autocovariance([a], sigma, max_lag=10, n_terms=2000)
    closed = sigma ** 2 * a ** np.arange(11) / (1 - a ** 2)
    assert np.allclose(gam, closed, rtol=1e-8, atol=0)


def test_autocovariance_matches_statsmodels():
    phi = np.array([0.5, -0.3, 0.1])
    gam = autocovariance(phi, 1.0, max_lag=8, n_terms=3000)
    oracle = arma_acovf(np.concatenate(([1.0], -phi)), np.array([1.0]), nobs=9)
    assert np.allclose(gam, oracle, rtol=1e-8, atol=1e-12)


def test_autocovariance_truncation_error():
    try:
        autocovariance([0.99], 1.0, max_lag=5, n_terms=100)
    except TruncationError:
        return
    raise AssertionError("MA 截断不足时应抛出 TruncationError")


def test_simulation_shape_and_index():
    spec = ShortMemorySpec(total_mass=0.75, true_order=10)
    s = simulate_short_memory(spec, n=50, K=5, warmup=100, seed=1)
    assert s.values.shape == (55,) and s.N == 55
    assert s.t_index[0] == -4 and s.t_index[-1] == 50
    assert s.rng_seed == 1


def test_simulation_is_deterministic():
    spec = ArfimaSpec(ar=ShortMemorySpec(total_mass=0.75, true_order=10))
    a = simulate(spec, n=200, K=3, warmup=50, seed=42)
    b = simulate(spec, n=200, K=3, warmup=50, seed=42)
    c = simulate(spec, n=200, K=3, warmup=50, seed=43)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_arfima_reduces_to_short_memory():
    ar = ShortMemorySpec(total_mass=0.99, true_order=20)
    degenerate = ArfimaSpec(ar=ar, ma_coeffs=(1.0,), frac_d=0.0, frac_truncation=10)
    assert np.array_equal(arfima_noise_filter(degenerate), [1.0])
    short = simulate_short_memory(ar, n=300, K=2, warmup=100, seed=9)
    long = simulate_arfima(degenerate, n=300, K=2, warmup=100, seed=9)
    assert np.array_equal(short.values, long.values)


def test_simulation_rejects_nonstationary():
    try:
        simulate_short_memory(ShortMemorySpec(total_mass=1.0, true_order=5), n=10, K=1, warmup=0, seed=0)
    except NonstationaryError:
        return
    raise AssertionError("φ̄ = 1 应当被拒绝")


def test_simulated_acf_matches_theory():
    spec = ShortMemorySpec(total_mass=0.5, true_order=1)
    s = simulate_short_memory(spec, n=20000, K=1, warmup=500, seed=5)
    sample_acf = acf(s.values, nlags=3, fft=True)
    assert np.allclose(sample_acf, 0.5 ** np.arange(4), atol=0.03)


def test_zero_innovation_sd_gives_zero_series():
    ar = ShortMemorySpec(total_mass=0.75, true_order=10, innovation_sd=0.0)
    assert np.array_equal(simulate_short_memory(ar, n=50, K=3, warmup=20, seed=1).values, np.zeros(53))
    assert np.array_equal(simulate_arfima(ArfimaSpec(ar=ar), n=50, K=3, warmup=20, seed=1).values, np.zeros(53))


def test_short_memory_variance_matches_autocovariance():
    spec = ShortMemorySpec(total_mass=0.75, true_order=100)
    gamma0 = autocovariance(short_memory_coeffs(spec), 1.0, max_lag=0, n_terms=12000)[0]
    variances = np.array([np.var(simulate_short_memory(spec, n=999, K=1, warmup=1000, seed=seed).values) for seed in range(100)])
    assert np.all((variances >= 0.6 * gamma0) & (variances <= 1.6 * gamma0)), (gamma0, variances.min(), variances.max())
    assert 0.9 * gamma0 <= variances.mean() <= 1.1 * gamma0, (gamma0, variances.mean())


def test_arfima_noise_lag_one_correlation_matches_filter():
    ar = ShortMemorySpec(total_mass=0.75, true_order=10)
    spec = ArfimaSpec(ar=ar, frac_d=0.49)
    assert spec.ma_order == 5
    s = simulate_arfima(spec, n=100000, K=1, warmup=2000, seed=17)
    phi = short_memory_coeffs(ar).entries
    # 用真实 AR 多项式反滤波恢复 u_t，丢弃前 K₀ 个受零初值影响的值
    u = lfilter(np.concatenate(([1.0], -phi)), [1.0], s.values)[ar.true_order:]
    c = arfima_noise_filter(spec)
    expected = np.dot(c[:-1], c[1:]) / np.dot(c, c)
    observed = np.dot(u[:-1], u[1:]) / np.dot(u, u)
    assert abs(observed - expected) <= 0.02, (observed, expected)


def test_csv_round_trip_preserves_values_and_budget():
    s = simulate_short_memory(ShortMemorySpec(total_mass=0.75, true_order=3), n=20, K=4, warmup=10, seed=2)
    text = s.to_csv()
    assert text.splitlines()[0] == "t,value"
    restored = SeriesSample.read_csv(io.StringIO(text))
    assert restored.K == 4 and restored.n == 20
    assert np.array_equal(restored.values, s.values)
    rebudgeted = restored.with_lag_budget(10)
    assert rebudgeted.n == 14 and np.array_equal(rebudgeted.values, s.values)


def run_test():
    """依次执行本文件中的全部测试。"""
    for name, func in sorted(globals().items()):
        if name.startswith("test_") and callable(func):
            func()
            print(f"{name} 通过")
    print("test_simulate 全部通过!")


if __name__ == "__main__":
    run_test()
