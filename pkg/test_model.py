"""系数空间测试脚本。

覆盖权重序列、RKHS 范数与欧氏范数、椭球成员判定、衰减包络以及椭球抽样。
"""
import numpy as np
from pydantic import ValidationError

from ellipsar.errors import DimensionError
from ellipsar.model import (
    CoefficientVector,
    EllipsoidSpec,
    WeightSequence,
    decay_envelope_check,
    euclidean_distance,
    euclidean_norm,
    in_ellipsoid,
    rkhs_inner,
    rkhs_norm,
    sample_ellipsoid,
)


def test_weights_follow_power_law():
    w = WeightSequence(exponent=0.501, max_index=4)
    expected = np.arange(1, 5, dtype=float) ** 0.501
    assert np.allclose(w.weights(), expected, rtol=0, atol=1e-15)
    assert w.weight(1) == 1.0
    assert np.allclose(WeightSequence(exponent=1.0, scale=2.0, max_index=3).weights(), [2.0, 4.0, 6.0])


def test_weight_exponent_must_exceed_half():
    try:
        WeightSequence(exponent=0.5, max_index=3)
    except ValidationError:
        pass
    else:
        raise AssertionError("exponent=0.5 应当被拒绝")


def test_weights_beyond_max_index_rejected():
    w = WeightSequence(exponent=0.6, max_index=3)
    for call in (lambda: w.weights(4), lambda: w.weight(0), lambda: rkhs_norm([1.0, 2.0, 3.0, 4.0], w)):
        try:
            call()
        except DimensionError:
            continue
        raise AssertionError("超出权重范围时应抛出 DimensionError")


def test_rkhs_norm_dominates_euclidean():
    rng = np.random.default_rng(11)
    w = WeightSequence(exponent=0.501, max_index=20)
    for _ in range(50):
        b = rng.normal(size=rng.integers(1, 21))
        assert rkhs_norm(b, w) >= euclidean_norm(b)
    assert rkhs_norm(np.zeros(5), w) == 0.0


def test_rkhs_norm_is_homogeneous_and_subadditive():
    rng = np.random.default_rng(12)
    w = WeightSequence(exponent=0.7, max_index=15)
    for _ in range(200):
        K = int(rng.integers(1, 16))
        a, b = rng.normal(size=K), rng.normal(size=K)
        c = float(rng.normal(scale=5.0))
        assert np.isclose(rkhs_norm(c * b, w), abs(c) * rkhs_norm(b, w), rtol=1e-12, atol=0)
        assert rkhs_norm(a + b, w) <= (rkhs_norm(a, w) + rkhs_norm(b, w)) * (1 + 1e-12)


def test_rkhs_inner_is_consistent_with_norm():
    w = WeightSequence(exponent=0.8, max_index=6)
    a = np.array([0.3, -0.2, 0.1])
    b = np.array([1.0, 0.5, -0.25, 0.125])
    assert np.isclose(rkhs_inner(a, b, w), rkhs_inner(b, a, w))
    assert np.isclose(rkhs_inner(b, b, w), rkhs_norm(b, w) ** 2)
    # 较短的向量按零补齐
    assert np.isclose(rkhs_inner(a, b, w), np.sum(w.weights(3) ** 2 * a * b[:3]))


def test_euclidean_distance_counts_implicit_tail():
    assert euclidean_distance([1.0], [1.0, 2.0]) == 2.0
    assert np.isclose(euclidean_distance([0.0, 0.0], [3.0]), 3.0)


def test_in_ellipsoid_is_exact_at_boundary():
    w = WeightSequence(exponent=1.0, max_index=2)
    e = EllipsoidSpec(weights=w, radius=2.0)
    assert in_ellipsoid([2.0, 0.0], e)
    assert in_ellipsoid([0.0, 1.0], e)
    assert not in_ellipsoid([2.0, 1e-6], e)
    assert e.contains(CoefficientVector(entries=[1.0, 0.5]))


def test_sampled_points_satisfy_decay_envelope():
    rng = np.random.default_rng(3)
    w = WeightSequence(exponent=0.501, max_index=4)
    e = EllipsoidSpec(weights=w, radius=1.5)
    draws = sample_ellipsoid(e, 200, rng)
    assert draws.shape == (200, 4)
    for b in draws:
        assert in_ellipsoid(b, e)
        assert decay_envelope_check(b, w, e.radius)
    # 包络只是必要条件
    assert decay_envelope_check([1.5, 1.5 / 2 ** 0.501], w, 1.5)
    assert not in_ellipsoid([1.5, 1.5 / 2 ** 0.501], e)


def test_coefficient_vector_is_read_only():
    b = CoefficientVector(entries=[0.1, 0.2])
    assert b.K == 2 and len(b) == 2
    assert b.tolist() == [0.1, 0.2]
    try:
        b.entries[0] = 1.0
    except ValueError:
        pass
    else:
        raise AssertionError("系数数组应当只读")


def run_test():
    """依次执行本文件中的全部测试。"""
    for name, func in sorted(globals().items()):
        if name.startswith("test_") and callable(func):
            func()
            print(f"{name} 通过")
    print("test_model 全部通过!")


if __name__ == "__main__":
    run_test()
