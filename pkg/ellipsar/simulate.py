"""数据生成模块，模拟短记忆 AR 过程与长记忆 ARFIMA 过程，并提供平稳性诊断。

所有模拟都从零初始状态出发，先丢弃 warmup 个观测，再返回 N = n + K 个值，
下标约定为 t = −(K−1)..n。随机数由 numpy.random.default_rng(seed) 生成，
相同输入逐位一致。递推与滤波统一交给 scipy.signal.lfilter。
"""
import io
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.linalg import companion
from scipy.signal import lfilter

from ellipsar.errors import DimensionError, DomainError, NonstationaryError, TruncationError
from ellipsar.model import CoefficientLike, CoefficientVector, as_array
from ellipsar.utils import setup_logger

logger = setup_logger("simulate")

# 默认保留的分数积分项数
DEFAULT_FRAC_TRUNCATION = 1000
# MA 展开尾部容差
MA_TAIL_TOLERANCE = 1e-10


def linear_ma_coeffs(L: int = 5) -> Tuple[float, ...]:
    """MA 多项式 θ_l = 1 − 0.1·l，l = 0..L。"""
    return tuple(1.0 - 0.1 * l for l in range(L + 1))


class ShortMemorySpec(BaseModel):
    """短记忆设计：φ_k = φ̄·k^{-1/2} / Σ_{j≤K₀} j^{-1/2}，k ≤ K₀。

    Attributes:
        total_mass: 系数绝对值之和 φ̄。
        true_order: 真实阶数 K₀。
        innovation_sd: 新息标准差 σ。
    """
    model_config = ConfigDict(frozen=True)

    total_mass: float = Field(gt=0, description="系数总质量 φ̄")
    true_order: int = Field(ge=1, description="真实阶数 K₀")
    innovation_sd: float = Field(default=1.0, ge=0, description="新息标准差 σ")

    @property
    def is_stationary(self) -> bool:
        # 系数全为正且和为 φ̄，特征根全在单位圆外当且仅当 φ̄ < 1
        return self.total_mass < 1.0


class ArfimaSpec(BaseModel):
    """长记忆设计：Y_t = Σ φ_k Y_{t−k} + (1−L)^{−d} Σ_l θ_l ε_{t−l}。

    Attributes:
        ar: 提供 φ_k 的短记忆设定。
        ma_coeffs: MA 系数 θ_0..θ_L。
        frac_d: 分数积分参数 d。
        frac_truncation: 分数积分展开保留的项数 J。
    """
    model_config = ConfigDict(frozen=True)

    ar: ShortMemorySpec
    ma_coeffs: Tuple[float, ...] = Field(default_factory=linear_ma_coeffs, min_length=1)
    frac_d: float = Field(default=0.49, gt=-0.5, lt=0.5, description="分数积分参数 d")
    frac_truncation: int = Field(default=DEFAULT_FRAC_TRUNCATION, ge=1, description="分数积分截断项数 J")

    @property
    def ma_order(self) -> int:
        return len(self.ma_coeffs) - 1

    @model_validator(mode="after")
    def _truncation_covers_ma(self):
        if self.frac_truncation < self.ma_order:
            raise ValueError(f"frac_truncation={self.frac_truncation} 小于 MA 阶数 {self.ma_order}")
        return self


ProcessSpec = Union[ShortMemorySpec, ArfimaSpec]


class SeriesSample(BaseModel):
    """一条模拟或读入的序列，下标 t = −(K−1)..n，总长度 N = n + K。

    Attributes:
        values: 按时间顺序排列的观测值。
        n: 有效样本量（回归的行数）。
        K: 滞后阶数预算。
        rng_seed: 生成该序列的随机种子，读入的数据为 None。
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    n: int = Field(ge=1)
    K: int = Field(ge=1)
    rng_seed: Optional[int] = Field(default=None, ge=0)

    @field_validator("values", mode="before")
    @classmethod
    def _as_array(cls, value):
        arr = np.array(value, dtype=float).reshape(-1)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _length_matches(self):
        if self.values.shape[0] != self.n + self.K:
            raise ValueError(f"序列长度 {self.values.shape[0]} 不等于 n + K = {self.n + self.K}")
        return self

    @property
    def N(self) -> int:
        return self.n + self.K

    @property
    def t_index(self) -> np.ndarray:
        return np.arange(-(self.K - 1), self.n + 1)

    @classmethod
    def from_values(cls, values: Sequence[float], K: int, rng_seed: Optional[int] = None) -> "SeriesSample":
        """用给定的滞后预算 K 包装一段观测值。"""
        values = np.asarray(values, dtype=float)
        if values.shape[0] <= K:
            raise DimensionError(f"序列长度 {values.shape[0]} 不足以支持 K={K}")
        return cls(values=values, n=values.shape[0] - K, K=K, rng_seed=rng_seed)

    def with_lag_budget(self, K: int) -> "SeriesSample":
        """同一组 N 个观测值，按新的 K 重新划分 (n, K)。"""
        return SeriesSample.from_values(self.values, K, rng_seed=self.rng_seed)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.t_index, "value": self.values})

    def to_csv(self, path: Optional[str] = None) -> str:
        """按 `t,value` 表头输出 CSV，数值保留 17 位有效数字。"""
        text = self.to_frame().to_csv(index=False, float_format="%.17g", lineterminator="\n")
        if path:
            with open(path, "w", encoding="utf-8") as f:
                f.write(text)
        return text

    @classmethod
    def read_csv(cls, source: Union[str, io.StringIO], K: Optional[int] = None) -> "SeriesSample":
        """读取 `t,value` 格式的 CSV。

        Args:
            source: 文件路径或文本缓冲区。
            K: 滞后预算；缺省时由首个 t 推断（K = 1 − t_first）。

        Returns:
            SeriesSample 对象。
        """
        frame = pd.read_csv(source, float_precision="round_trip")
        missing = {"t", "value"} - set(frame.columns)
        if missing:
            raise DimensionError(f"CSV 缺少列: {sorted(missing)}")
        frame = frame.sort_values("t")
        if K is None:
            K = max(1, 1 - int(frame["t"].iloc[0]))
        return cls.from_values(frame["value"].to_numpy(dtype=float), K)


class RootCheck(NamedTuple):
    """特征根检查结果。"""
    passes: bool
    min_modulus: float
    roots: np.ndarray

    @property
    def has_complex_roots(self) -> bool:
        return bool(np.any(np.abs(self.roots.imag) > 1e-12))


def short_memory_coeffs(spec: ShortMemorySpec) -> CoefficientVector:
    """短记忆设计的 AR 系数，正且递减，绝对值之和为 φ̄。"""
    k = np.arange(1, spec.true_order + 1, dtype=float)
    decay = k ** -0.5
    return CoefficientVector(entries=spec.total_mass * decay / decay.sum())


def fractional_coeffs(d: float, J: int) -> np.ndarray:
    """(1−L)^{−d} 的展开系数 π_0..π_J。

    递推 π_0 = 1，π_j = π_{j−1}·(j−1+d)/j，与 Γ(j+d)/(Γ(d)Γ(j+1)) 一致。

    Args:
        d: 分数积分参数，|d| < 0.5。
        J: 截断项数。

    Returns:
        长度为 J + 1 的数组。

    Raises:
        DomainError: |d| ≥ 0.5。
    """
    if not abs(d) < 0.5:
        raise DomainError(f"分数积分参数 d={d} 不满足 |d| < 0.5")
    if J < 0:
        raise DomainError(f"截断项数 J={J} 必须非负")
    j = np.arange(1, J + 1, dtype=float)
    return np.concatenate(([1.0], np.cumprod((j - 1.0 + d) / j)))


def _ar_denominator(phi: np.ndarray) -> np.ndarray:
    return np.concatenate(([1.0], -phi))


def _innovations(spec: ShortMemorySpec, total: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return spec.innovation_sd * rng.standard_normal(total)


def _check_sizes(n: int, K: int, warmup: int) -> None:
    if n < 1 or K < 1:
        raise DimensionError(f"n={n} 与 K={K} 都必须至少为 1")
    if warmup < 0:
        raise DimensionError(f"warmup={warmup} 不能为负")


def simulate_short_memory(spec: ShortMemorySpec, n: int, K: int, warmup: int, seed: int) -> SeriesSample:
    """模拟 Y_t = Σ_{k≤K₀} φ_k Y_{t−k} + ε_t，ε_t ~ N(0, σ²)。

    Args:
        spec: 短记忆设定。
        n: 有效样本量。
        K: 滞后预算。
        warmup: 丢弃的预热观测数。
        seed: 随机种子。

    Returns:
        长度为 n + K 的 SeriesSample。

    Raises:
        NonstationaryError: φ̄ ≥ 1。
    """
    _check_sizes(n, K, warmup)
    if not spec.is_stationary:
        raise NonstationaryError(f"φ̄={spec.total_mass} 使 AR 多项式存在单位圆内的根")
    phi = short_memory_coeffs(spec).entries
    total = warmup + n + K
    eps = _innovations(spec, total, seed)
    path = lfilter([1.0], _ar_denominator(phi), eps)
    logger.debug(f"短记忆模拟完成: K0={spec.true_order}, φ̄={spec.total_mass}, 总长度={total}, seed={seed}")
    return SeriesSample(values=path[warmup:], n=n, K=K, rng_seed=seed)


def arfima_noise_filter(spec: ArfimaSpec) -> np.ndarray:
    """π 与 θ 的卷积 c，u_t = Σ_j c_j ε_{t−j}；去掉末尾的零。"""
    pi = fractional_coeffs(spec.frac_d, spec.frac_truncation)
    c = np.convolve(pi, np.asarray(spec.ma_coeffs, dtype=float))
    trimmed = np.trim_zeros(c, "b")
    return trimmed if trimmed.size else np.zeros(1)


def simulate_arfima(spec: ArfimaSpec, n: int, K: int, warmup: int, seed: int) -> SeriesSample:
    """模拟 ARFIMA 设计。

    先构造 v_t = Σ_l θ_l ε_{t−l} 与 u_t = Σ_{j≤J} π_j v_{t−j}（合并为一个 FIR 滤波），
    再迭代 Y_t = Σ φ_k Y_{t−k} + u_t。新息序列与 simulate_short_memory 完全相同，
    因此 d = 0、θ = δ₀ 时两者逐位一致。

    Args:
        spec: ARFIMA 设定。
        n: 有效样本量。
        K: 滞后预算。
        warmup: 丢弃的预热观测数。
        seed: 随机种子。

    Returns:
        长度为 n + K 的 SeriesSample。
    """
    _check_sizes(n, K, warmup)
    if not spec.ar.is_stationary:
        raise NonstationaryError(f"φ̄={spec.ar.total_mass} 使 AR 多项式存在单位圆内的根")
    phi = short_memory_coeffs(spec.ar).entries
    total = warmup + n + K
    eps = _innovations(spec.ar, total, seed)
    noise = lfilter(arfima_noise_filter(spec), [1.0], eps)
    path = lfilter([1.0], _ar_denominator(phi), noise)
    logger.debug(f"ARFIMA 模拟完成: d={spec.frac_d}, L={spec.ma_order}, J={spec.frac_truncation}, seed={seed}")
    return SeriesSample(values=path[warmup:], n=n, K=K, rng_seed=seed)


def simulate(spec: ProcessSpec, n: int, K: int, warmup: int, seed: int) -> SeriesSample:
    """按设定类型分派到对应的模拟函数。"""
    if isinstance(spec, ArfimaSpec):
        return simulate_arfima(spec, n, K, warmup, seed)
    return simulate_short_memory(spec, n, K, warmup, seed)


def char_root_check(phi: CoefficientLike, margin: float = 1e-8) -> RootCheck:
    """检查 1 − Σ φ_k z^k 的所有根是否都在单位圆外。

    根通过伴随矩阵特征值求得：伴随矩阵的特征值 μ 与根满足 z = 1/μ。
    末尾的零系数先被去掉；全零时多项式为常数，检查自动通过。

    Args:
        phi: AR 系数。
        margin: 判定 |z| > 1 + margin 的余量，用于区分单位根与舍入误差。

    Returns:
        RootCheck(passes, min_modulus, roots)。
    """
    phi = np.trim_zeros(as_array(phi), "b")
    if phi.size == 0:
        return RootCheck(True, float("inf"), np.zeros(0, dtype=complex))
    mu = np.linalg.eigvals(companion(_ar_denominator(phi)))
    roots = 1.0 / mu
    min_modulus = float(np.min(np.abs(roots)))
    return RootCheck(min_modulus > 1.0 + margin, min_modulus, roots)


def ar_to_ma(phi: CoefficientLike, n_terms: int) -> np.ndarray:
    """AR 多项式的幂级数求逆，得到 MA(∞) 系数 ψ_0..ψ_{n_terms}。

    ψ_0 = 1，ψ_s = Σ_{k=1}^{min(s,K)} φ_k ψ_{s−k}。

    Raises:
        NonstationaryError: 特征根检查未通过。
    """
    phi = as_array(phi)
    check = char_root_check(phi)
    if not check.passes:
        raise NonstationaryError(f"AR 多项式最小根模 {check.min_modulus:.6g} 不大于 1")
    impulse = np.zeros(n_terms + 1)
    impulse[0] = 1.0
    return lfilter([1.0], _ar_denominator(phi), impulse)


def autocovariance(phi: CoefficientLike, sigma: float, max_lag: int, n_terms: int) -> np.ndarray:
    """由截断 MA 表示计算 γ(k) = σ² Σ_s ψ_s ψ_{s+k}，k = 0..max_lag。

    Args:
        phi: AR 系数。
        sigma: 新息标准差。
        max_lag: 最大滞后。
        n_terms: MA 展开项数，需使尾部（最后 K 项的最大绝对值）小于 1e−10。

    Returns:
        长度为 max_lag + 1 的数组。

    Raises:
        TruncationError: 尾部容差未达到。
        DimensionError: max_lag 超过 n_terms。
    """
    if max_lag > n_terms:
        raise DimensionError(f"max_lag={max_lag} 超过 MA 项数 {n_terms}")
    phi = as_array(phi)
    psi = ar_to_ma(phi, n_terms)
    window = max(1, np.trim_zeros(phi, "b").size)
    tail = float(np.max(np.abs(psi[-window:])))
    if tail >= MA_TAIL_TOLERANCE:
        raise TruncationError(f"MA 展开在 {n_terms} 项时尾部为 {tail:.3g}，未达到 {MA_TAIL_TOLERANCE}")
    full = np.correlate(psi, psi, mode="full")
    center = psi.shape[0] - 1
    return sigma ** 2 * full[center:center + max_lag + 1]
