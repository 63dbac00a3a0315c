"""估计模块，构建滞后回归问题并计算惩罚（岭）估计量与椭球约束估计量。

核心线性系统为 (X'X + τ·n·Λ²) b = X'Y，对应目标函数
(1/n)(Y − Xb)'(Y − Xb) + τ b'Λ²b。约束估计量通过对拉格朗日乘子 τ 二分求根得到，
并在同一个 ridge_solve 代码路径上产出最终结果。模型选择包括 B 网格准则
ln σ̂² + 2·df/n 与 AIC 滞后阶数选择。
"""
import math
from enum import Enum
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ellipsar.errors import DimensionError, DomainError, RankError, SolverError
from ellipsar.model import CoefficientVector, EllipsoidSpec, WeightSequence, rkhs_norm
from ellipsar.simulate import SeriesSample
from ellipsar.utils import setup_logger

logger = setup_logger("estimate")

# 约束求根的默认相对容差
DEFAULT_TOL = 1e-10
# X'X 奇异时用于逼近最小范数解的小惩罚
SINGULAR_TAU_FLOOR = 1e-12
# 括号上端最多加倍的次数
MAX_BRACKET_DOUBLINGS = 1000
MAX_BISECTIONS = 5000
DEFAULT_B_GRID_SIZE = 15
DEFAULT_B_GRID_SPAN = 10.0


class RegressionData(BaseModel):
    """滞后回归数据：X[t, k] = Y_{t−k}，Y[t] = Y_t，t = 1..n，k = 1..K。

    Attributes:
        design: n×K 设计矩阵。
        response: 长度为 n 的响应向量。
        n: 行数。
        K: 列数（滞后阶数）。
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, ignored_types=(cached_property,))

    design: np.ndarray
    response: np.ndarray
    n: int = Field(ge=1)
    K: int = Field(ge=1)

    @cached_property
    def gram(self) -> np.ndarray:
        return self.design.T @ self.design

    @cached_property
    def cross(self) -> np.ndarray:
        return self.design.T @ self.response

    @cached_property
    def full_rank(self) -> bool:
        return int(np.linalg.matrix_rank(self.design)) == self.K

    def leading_columns(self, p: int) -> "RegressionData":
        """只保留前 p 个滞后列，行（估计窗口）不变。"""
        if not 1 <= p <= self.K:
            raise DimensionError(f"p={p} 超出 1..{self.K}")
        return RegressionData(design=np.ascontiguousarray(self.design[:, :p]), response=self.response, n=self.n, K=p)


class FitResult(BaseModel):
    """一次拟合的系数与求解器状态。

    Attributes:
        coeffs: 长度为 K 的系数向量。
        tau: 实际使用的惩罚参数 τ。
        binding: 椭球约束是否起作用。
        df: 有效自由度。
        resid_var: 残差方差 σ̂² = (1/n) Σ 残差²。
        rkhs_norm_value: 系数的 RKHS 范数。
        radius: 约束半径 B，惩罚估计时为 None。
        n: 拟合使用的行数。
        warning: 奇异设计等情况的提示，正常时为 None。
    """
    model_config = ConfigDict(frozen=True)

    coeffs: CoefficientVector
    tau: float = Field(ge=0)
    binding: bool = False
    df: float = Field(ge=0)
    resid_var: float = Field(ge=0)
    rkhs_norm_value: float = Field(ge=0)
    radius: Optional[float] = None
    n: int = Field(ge=1)
    warning: Optional[str] = None

    @property
    def K(self) -> int:
        return self.coeffs.K


class Criterion(str, Enum):
    b_grid = "b_grid"
    aic = "aic"


class SelectionResult(BaseModel):
    """模型选择结果。

    Attributes:
        chosen: 准则值最小的拟合。
        grid: (B 或 p, 准则值) 列表，按候选值升序。
        criterion_name: 使用的准则。
    """
    model_config = ConfigDict(frozen=True)

    chosen: FitResult
    grid: List[Tuple[float, float]]
    criterion_name: Criterion

    @property
    def chosen_value(self) -> float:
        """被选中的 B（b_grid）或阶数 p（aic）。"""
        return self.grid[_argmin([value for _, value in self.grid])][0]

    @property
    def chosen_order(self) -> int:
        return int(self.chosen.K)


def aic_criterion(resid_var: float, df: float, n: int) -> float:
    """ln σ̂² + 2·df/n；σ̂² = 0 时返回 −inf。"""
    if resid_var <= 0.0:
        return -math.inf
    return math.log(resid_var) + 2.0 * df / n


def _argmin(values: Sequence[float]) -> int:
    # 严格小于才替换，平局保留较小的候选
    best = 0
    for i, value in enumerate(values):
        if value < values[best]:
            best = i
    return best


def build_design(s: SeriesSample) -> RegressionData:
    """由序列构造滞后设计矩阵。

    第 t 行（t = 1..n）为 (Y_{t−1}, ..., Y_{t−K})，只使用样本中下标 t−K..t−1 的值。

    Args:
        s: 长度为 n + K 的序列。

    Returns:
        RegressionData 对象。

    Raises:
        DimensionError: 序列长度与 n + K 不符。
    """
    values = np.asarray(s.values, dtype=float)
    if values.shape[0] != s.n + s.K:
        raise DimensionError(f"序列长度 {values.shape[0]} 不等于 n + K = {s.n + s.K}")
    windows = sliding_window_view(values[:-1], s.K)
    design = np.ascontiguousarray(windows[:, ::-1])
    response = values[s.K:].copy()
    return RegressionData(design=design, response=response, n=s.n, K=s.K)


def _penalty_diag(data: RegressionData, w: WeightSequence) -> np.ndarray:
    if data.K > w.max_index:
        raise DimensionError(f"设计矩阵有 {data.K} 列，但权重序列只定义到 {w.max_index}")
    return w.weights(data.K) ** 2


def _factorize(data: RegressionData, w: WeightSequence, tau: float):
    if tau < 0:
        raise DomainError(f"惩罚参数 τ={tau} 不能为负")
    if tau == 0 and not data.full_rank:
        raise RankError(f"τ = 0 时 X'X 奇异（K={data.K}，n={data.n}）")
    system = data.gram + tau * data.n * np.diag(_penalty_diag(data, w))
    try:
        return cho_factor(system, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise RankError(f"τ={tau} 时正规方程不可分解: {exc}") from exc


def degrees_of_freedom(data: RegressionData, w: WeightSequence, tau: float) -> float:
    """有效自由度 df = Trace((X'X + τnΛ²)⁻¹ X'X)。

    τ = 0 且设计满秩时精确返回 K。

    Raises:
        RankError: 系统奇异。
    """
    factor = _factorize(data, w, tau)
    if tau == 0:
        return float(data.K)
    return float(np.trace(cho_solve(factor, data.gram, check_finite=False)))


def ridge_solve(data: RegressionData, w: WeightSequence, tau: float) -> FitResult:
    """惩罚（广义岭）估计量 b = (X'X + τ·n·Λ²)⁻¹ X'Y。

    Args:
        data: 回归数据。
        w: 权重序列，max_index 不小于 K。
        tau: 惩罚参数 τ ≥ 0。

    Returns:
        binding = False 的 FitResult。

    Raises:
        DomainError: τ < 0。
        RankError: τ = 0 且 X'X 奇异。
    """
    factor = _factorize(data, w, tau)
    coeffs = cho_solve(factor, data.cross, check_finite=False)
    resid = data.response - data.design @ coeffs
    if tau == 0:
        df = float(data.K)
    else:
        df = float(np.trace(cho_solve(factor, data.gram, check_finite=False)))
    return FitResult(
        coeffs=CoefficientVector(entries=coeffs),
        tau=float(tau),
        binding=False,
        df=min(max(df, 0.0), float(data.K)),
        resid_var=float(np.mean(resid ** 2)),
        rkhs_norm_value=rkhs_norm(coeffs, w),
        n=data.n,
    )


class _NormCurve:
    """τ ↦ |b(τ)|_E，与 ridge_solve 共用同一 Cholesky 求解路径。

    返回值与 ridge_solve(data, w, τ).rkhs_norm_value 逐位相同，收敛判断因此直接作用于最终结果。
    """

    def __init__(self, data: RegressionData, w: WeightSequence):
        self.data = data
        self.w = w

    def coeffs(self, tau: float) -> np.ndarray:
        factor = _factorize(self.data, self.w, tau)
        return cho_solve(factor, self.data.cross, check_finite=False)

    def __call__(self, tau: float) -> float:
        return rkhs_norm(self.coeffs(tau), self.w)


def _solve_multiplier(curve: _NormCurve, radius: float, tol: float, floor: float = 0.0) -> float:
    """二分求解 |b(τ)|_E = B，返回满足 |b(τ)|_E ≤ B 的括号上端。

    Args:
        curve: 范数曲线。
        radius: 约束半径 B。
        tol: 相对容差，收敛条件为 |b(τ)|_E ≥ (1 − tol)·B。
        floor: 括号下端，X'X 奇异时取正数以保证系统可分解。
    """
    lo, hi = floor, max(1.0, 2.0 * floor)
    doublings = 0
    while curve(hi) > radius:
        lo, hi = hi, hi * 2.0
        doublings += 1
        if doublings > MAX_BRACKET_DOUBLINGS:
            raise SolverError(f"括号扩张超过 {MAX_BRACKET_DOUBLINGS} 次仍未满足 |b(τ)|_E ≤ B", radius=radius)
    logger.debug(f"τ 括号: [{lo:.6g}, {hi:.6g}]，扩张 {doublings} 次")

    lower_target = radius * (1.0 - tol)
    for iteration in range(MAX_BISECTIONS):
        norm_hi = curve(hi)
        if norm_hi >= lower_target:
            logger.debug(f"二分收敛: τ={hi:.12g}，迭代 {iteration} 次")
            return hi
        mid = hi / 2.0 if lo == 0.0 else math.sqrt(lo * hi)
        if not lo < mid < hi:
            logger.warning(f"τ 括号已无法细分 (τ={hi:.12g})，(B − |b|_E)/B = {(radius - norm_hi) / radius:.3g}")
            return hi
        if curve(mid) > radius:
            lo = mid
        else:
            hi = mid
    logger.warning(f"二分达到 {MAX_BISECTIONS} 次上限，返回 τ={hi:.12g}")
    return hi


def constrained_solve(data: RegressionData, e: EllipsoidSpec, tol: float = DEFAULT_TOL) -> FitResult:
    """椭球约束最小二乘估计量 b_n = argmin_{b ∈ E_K(B)} (1/n)|Y − Xb|²。

    先做无惩罚拟合；若其 RKHS 范数不超过 B·(1 + tol)，则约束不起作用，τ = 0。
    否则求解 |b(τ)|_E = B 得到乘子 τ_{B,n}，并在该 τ 上调用 ridge_solve，
    结果满足 (1 − tol)·B ≤ |b|_E ≤ B。
    X'X 奇异时用 τ = 1e−12 的拟合代替最小范数解，并在 warning 中注明；
    此时若约束不起作用，仍记录 τ = 0。

    Args:
        data: 回归数据。
        e: 约束椭球，权重的 max_index 不小于 K。
        tol: 相对容差，保证 |rkhs_norm − B| ≤ tol·B。

    Returns:
        FitResult，binding 表示约束是否起作用。

    Raises:
        SolverError: 括号扩张失败。
    """
    w = e.weights
    warning = None
    floor = 0.0
    try:
        free_fit = ridge_solve(data, w, 0.0)
    except RankError:
        warning = "singular_design"
        floor = SINGULAR_TAU_FLOOR
        logger.warning(f"X'X 奇异 (n={data.n}, K={data.K})，改用 τ={SINGULAR_TAU_FLOOR} 的最小范数近似")
        free_fit = ridge_solve(data, w, SINGULAR_TAU_FLOOR)

    if free_fit.rkhs_norm_value <= e.radius * (1.0 + tol):
        return free_fit.model_copy(update={"tau": 0.0, "radius": e.radius, "warning": warning})

    tau = _solve_multiplier(_NormCurve(data, w), e.radius, tol, floor=floor)
    fit = ridge_solve(data, w, tau)
    return fit.model_copy(update={"binding": True, "radius": e.radius, "warning": warning})


def default_b_grid(data: RegressionData, w: WeightSequence, size: int = DEFAULT_B_GRID_SIZE, span: float = DEFAULT_B_GRID_SPAN) -> np.ndarray:
    """以无惩罚拟合的 RKHS 范数 r̂ 为中心，在 [r̂/span, r̂·span] 上取对数等距点。"""
    try:
        r_hat = ridge_solve(data, w, 0.0).rkhs_norm_value
    except RankError:
        r_hat = ridge_solve(data, w, SINGULAR_TAU_FLOOR).rkhs_norm_value
    if r_hat <= 0.0:
        # 零数据：任意 B 都给出零系数
        r_hat = 1.0
    return np.geomspace(r_hat / span, r_hat * span, size)


def select_B(data: RegressionData, w: WeightSequence, grid: Optional[Sequence[float]] = None, tol: float = DEFAULT_TOL) -> SelectionResult:
    """在 B 网格上最小化 ln σ̂²_B + 2·df(B)/n。

    Args:
        data: 回归数据。
        w: 权重序列。
        grid: 候选半径，缺省时使用 default_b_grid。
        tol: 传给 constrained_solve 的容差。

    Returns:
        SelectionResult，平局时选较小的 B。

    Raises:
        DimensionError: 网格为空。
        DomainError: 网格中存在非正值。
        SolverError: 某个 B 求解失败，异常携带该 B。
    """
    grid = default_b_grid(data, w) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DimensionError("B 网格不能为空")
    if np.any(grid <= 0):
        raise DomainError("B 网格中的值必须为正")
    grid = np.sort(grid)

    fits: List[FitResult] = []
    trace: List[Tuple[float, float]] = []
    for radius in grid:
        try:
            fit = constrained_solve(data, EllipsoidSpec(weights=w, radius=float(radius)), tol=tol)
        except Exception as exc:
            raise SolverError(f"B={radius:.6g} 时约束求解失败: {exc}", radius=float(radius)) from exc
        fits.append(fit)
        trace.append((float(radius), aic_criterion(fit.resid_var, fit.df, data.n)))

    best = _argmin([value for _, value in trace])
    logger.debug(f"B 选择: B={trace[best][0]:.6g}，准则={trace[best][1]:.6g}，τ={fits[best].tau:.6g}")
    return SelectionResult(chosen=fits[best], grid=trace, criterion_name=Criterion.b_grid)


def default_p_max(n: int) -> int:
    """AIC 的默认最大阶数 10·log₁₀(n)，不超过 n/4，至少为 1。"""
    if n < 1:
        return 1
    return max(1, min(int(math.floor(10.0 * math.log10(n))), n // 4))


def _window_design(s: SeriesSample, window_lag: int) -> RegressionData:
    if s.N <= window_lag:
        raise DimensionError(f"序列长度 {s.N} 不足以支持滞后窗口 {window_lag}")
    return build_design(s.with_lag_budget(window_lag))


def fit_ols_ar(s: SeriesSample, p: int, window_lag: Optional[int] = None) -> FitResult:
    """p 阶 AR 的最小二乘拟合（τ = 0 的 ridge_solve）。

    估计窗口固定为丢弃序列前 window_lag 个观测后的部分；缺省为 max(p, s.K)，
    因此 p = s.K 时与 ridge_solve(build_design(s), w, 0) 完全相同。

    Args:
        s: 序列。
        p: 滞后阶数。
        window_lag: 估计窗口的起点偏移，不小于 p。

    Returns:
        FitResult。

    Raises:
        DimensionError: p < 1 或数据不足。
        RankError: 设计矩阵奇异。
    """
    if p < 1:
        raise DimensionError(f"AR 阶数 p={p} 必须至少为 1")
    window_lag = max(p, s.K) if window_lag is None else window_lag
    if window_lag < p:
        raise DimensionError(f"估计窗口偏移 {window_lag} 小于阶数 {p}")
    data = _window_design(s, window_lag).leading_columns(p)
    return ridge_solve(data, WeightSequence(exponent=1.0, max_index=p), 0.0)


def select_aic_order(s: SeriesSample, p_max: Optional[int] = None) -> SelectionResult:
    """在 p = 1..p_max 上最小化 ln σ̂²_p + 2p/n，所有候选共用丢弃前 p_max 个观测的窗口。

    Args:
        s: 序列。
        p_max: 最大阶数，缺省时使用 default_p_max。

    Returns:
        SelectionResult，chosen_order 即 K_AIC；平局选较小的 p。

    Raises:
        DimensionError: p_max < 1 或数据不足。
    """
    p_max = default_p_max(s.N) if p_max is None else p_max
    if p_max < 1:
        raise DimensionError(f"p_max={p_max} 必须至少为 1")
    if s.N - p_max <= p_max:
        raise DimensionError(f"序列长度 {s.N} 不足以在共同窗口上拟合 {p_max} 阶模型")

    window = _window_design(s, p_max)
    w = WeightSequence(exponent=1.0, max_index=p_max)
    fits: List[FitResult] = []
    trace: List[Tuple[float, float]] = []
    for p in range(1, p_max + 1):
        fit = ridge_solve(window.leading_columns(p), w, 0.0)
        fits.append(fit)
        trace.append((float(p), aic_criterion(fit.resid_var, float(p), window.n)))

    best = _argmin([value for _, value in trace])
    logger.debug(f"AIC 选择阶数 K_AIC={best + 1}（p_max={p_max}，n={window.n}）")
    return SelectionResult(chosen=fits[best], grid=trace, criterion_name=Criterion.aic)
