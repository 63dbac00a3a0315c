"""预测评估模块，把系数转换为一步预测，计算测试集 MSE 与相对改进比。

同时提供一致收敛诊断：对任意 a，
sup_t |X_t(a)| ≤ |a|_E · sup_t (Σ_k (Y_{t−k}/λ_k)²)^{1/2}（Cauchy–Schwarz）。
"""
import math
from typing import List, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field

from ellipsar.errors import DimensionError, EllipsarError
from ellipsar.model import CoefficientLike, WeightSequence, as_array, rkhs_norm
from ellipsar.simulate import SeriesSample
from ellipsar.utils import setup_logger

logger = setup_logger("forecast")


class EvaluationReport(BaseModel):
    """候选模型与基准模型在同一组一步预测目标上的比较结果。

    Attributes:
        mse_candidate: 候选模型的 MSE。
        mse_benchmark: 基准模型的 MSE。
        relative_improvement: mse_candidate / mse_benchmark。
        n_test: 参与评分的目标个数。
    """
    model_config = ConfigDict(frozen=True)

    mse_candidate: float = Field(ge=0)
    mse_benchmark: float = Field(ge=0)
    relative_improvement: float
    n_test: int = Field(ge=1)


class BoundViolationError(EllipsarError, ArithmeticError):
    """一致误差上界小于观测到的最大误差。"""


SeriesLike = Union[SeriesSample, Sequence[float], np.ndarray]


def _raw_values(series: SeriesLike) -> np.ndarray:
    if isinstance(series, SeriesSample):
        return series.values
    return np.asarray(series, dtype=float).reshape(-1)


def _lag_matrix(values: np.ndarray, K: int) -> np.ndarray:
    """行 i 为预测 values[K + i] 时可用的 (Y_{t−1}, ..., Y_{t−K})。"""
    return sliding_window_view(values[:-1], K)[:, ::-1]


def predict(b: CoefficientLike, history: Sequence[float]) -> float:
    """一步预测 Σ_k b_k · history[end − k + 1]，最近的观测乘以 b₁。

    Args:
        b: 系数向量。
        history: 按时间从旧到新排列的历史观测。

    Returns:
        预测值。

    Raises:
        DimensionError: 历史长度小于系数长度。
    """
    b = as_array(b)
    history = np.asarray(history, dtype=float).reshape(-1)
    K = b.shape[0]
    if history.shape[0] < K:
        raise DimensionError(f"历史长度 {history.shape[0]} 小于系数长度 {K}")
    if K == 0:
        return 0.0
    return float(np.dot(b, history[::-1][:K]))


def one_step_errors(b: CoefficientLike, values: np.ndarray, start: int) -> np.ndarray:
    """从下标 start 开始，对每个目标计算一步预测误差。"""
    b = as_array(b)
    K = b.shape[0]
    lags = _lag_matrix(values, start)[:, :K]
    return values[start:] - lags @ b


def evaluate(b_candidate: CoefficientLike, b_benchmark: CoefficientLike, test: SeriesLike) -> EvaluationReport:
    """在测试序列上比较两个模型的一步预测 MSE。

    测试序列的前 max(K_candidate, K_benchmark) 个值只作为历史，不参与评分，
    两个模型在完全相同的目标上评分。

    Args:
        b_candidate: 候选模型系数（比值的分子）。
        b_benchmark: 基准模型系数（比值的分母）。
        test: 测试序列（SeriesSample 或按时间排列的数组）。

    Returns:
        EvaluationReport。基准 MSE 为 0 时，候选 MSE 也为 0 则比值为 1，否则为 +inf。

    Raises:
        DimensionError: 测试序列不足以提供任何评分目标。
    """
    values = _raw_values(test)
    start = max(as_array(b_candidate).shape[0], as_array(b_benchmark).shape[0], 1)
    if values.shape[0] <= start:
        raise DimensionError(f"测试序列长度 {values.shape[0]} 不足以提供 {start} 个滞后之后的评分目标")
    mse_c = float(np.mean(one_step_errors(b_candidate, values, start) ** 2))
    mse_b = float(np.mean(one_step_errors(b_benchmark, values, start) ** 2))
    if mse_b > 0.0:
        ratio = mse_c / mse_b
    else:
        ratio = 1.0 if mse_c == 0.0 else math.inf
    return EvaluationReport(
        mse_candidate=mse_c,
        mse_benchmark=mse_b,
        relative_improvement=ratio,
        n_test=int(values.shape[0] - start),
    )


def _common_K(samples: Sequence[SeriesSample], *vectors: np.ndarray) -> int:
    Ks = {v.shape[0] for v in vectors} | {s.K for s in samples}
    if len(Ks) != 1:
        raise DimensionError(f"系数与样本的 K 不一致: {sorted(Ks)}")
    return Ks.pop()


def _sample_lags(sample: SeriesSample) -> np.ndarray:
    return _lag_matrix(sample.values, sample.K)


def observed_sup_error(a: CoefficientLike, samples: Sequence[SeriesSample]) -> float:
    """sup_{t, 样本} |X_t(a)|，t 取每个样本的 1..n。"""
    a = as_array(a)
    if not samples:
        return 0.0
    return float(max(np.max(np.abs(_sample_lags(s) @ a)) for s in samples))


def weighted_lag_sup(w: WeightSequence, samples: Sequence[SeriesSample]) -> float:
    """sup_{t, 样本} (Σ_k (Y_{t−k}/λ_k)²)^{1/2}。"""
    if not samples:
        return 0.0
    lam = w.weights(samples[0].K)
    return float(max(np.max(np.linalg.norm(_sample_lags(s) / lam, axis=1)) for s in samples))


class UniformBoundReport(BaseModel):
    """一致误差上界及其左侧的观测值。"""
    model_config = ConfigDict(frozen=True)

    bound: float = Field(ge=0)
    observed: float = Field(ge=0)
    rkhs_distance: float = Field(ge=0)
    weighted_sup: float = Field(ge=0)


def uniform_bound_report(b: CoefficientLike, phi_ref: CoefficientLike, w: WeightSequence, samples: Sequence[SeriesSample]) -> UniformBoundReport:
    """计算 |φ − b|_E · sup_t (Σ_k (Y_{t−k}/λ_k)²)^{1/2} 及观测到的 sup_t |X_t(φ − b)|。

    Raises:
        DimensionError: 系数与样本的 K 不一致。
        BoundViolationError: 上界小于观测值（超出舍入误差）。
    """
    b, phi_ref = as_array(b), as_array(phi_ref)
    _common_K(samples, b, phi_ref)
    diff = phi_ref - b
    distance = rkhs_norm(diff, w)
    weighted_sup = weighted_lag_sup(w, samples)
    bound = distance * weighted_sup
    observed = observed_sup_error(diff, samples)
    if observed > bound * (1.0 + 1e-12) + 1e-300:
        raise BoundViolationError(f"一致误差上界 {bound:.6g} 小于观测值 {observed:.6g}")
    return UniformBoundReport(bound=bound, observed=observed, rkhs_distance=distance, weighted_sup=weighted_sup)


def uniform_bound_diagnostic(b: CoefficientLike, phi_ref: CoefficientLike, w: WeightSequence, samples: List[SeriesSample]) -> float:
    """返回一致误差上界（右侧），并确认它不小于观测到的 sup_t |X_t(φ − b)|。"""
    return uniform_bound_report(b, phi_ref, w, samples).bound
