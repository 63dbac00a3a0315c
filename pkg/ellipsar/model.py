"""系数空间模块，定义椭球约束集合、权重序列以及两种范数。

所有一致性结论都在欧氏范数 |·|₂ 与 RKHS 范数 |·|_E 下表述：
|b|_E² = Σ λ_k² b_k²，其中 λ_k = scale·k^exponent。
K 之后的系数隐含为零，从不显式存储。
"""
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ellipsar.errors import DimensionError


class WeightSequence(BaseModel):
    """惩罚权重序列 λ_k = scale·k^exponent，k = 1..max_index。

    Attributes:
        exponent: 增长指数 λ，必须大于 1/2。
        scale: 比例常数，默认 1。
        max_index: 最大滞后阶数 K。
    """
    model_config = ConfigDict(frozen=True)

    exponent: float = Field(gt=0.5, description="权重增长指数，需大于 1/2")
    scale: float = Field(default=1.0, gt=0, description="比例常数")
    max_index: int = Field(ge=1, description="最大滞后阶数 K")

    def weight(self, k: int) -> float:
        """返回第 k 个权重 λ_k（k 从 1 开始）。"""
        if not 1 <= k <= self.max_index:
            raise DimensionError(f"权重下标 {k} 超出范围 1..{self.max_index}")
        return self.scale * float(k) ** self.exponent

    def weights(self, K: Optional[int] = None) -> np.ndarray:
        """返回前 K 个权重组成的数组，默认 K = max_index。"""
        K = self.max_index if K is None else K
        if K > self.max_index:
            raise DimensionError(f"需要 {K} 个权重，但权重序列只定义到 {self.max_index}")
        return self.scale * np.arange(1, K + 1, dtype=float) ** self.exponent

    def with_max_index(self, K: int) -> "WeightSequence":
        """返回同一几何形状、不同阶数的权重序列。"""
        return WeightSequence(exponent=self.exponent, scale=self.scale, max_index=K)


class CoefficientVector(BaseModel):
    """有限长系数向量 b_1..b_K，K 之后的系数隐含为零。

    Attributes:
        entries: 只读的一维浮点数组。
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: np.ndarray

    @field_validator("entries", mode="before")
    @classmethod
    def _as_array(cls, value):
        arr = np.array(value, dtype=float).reshape(-1)
        arr.setflags(write=False)
        return arr

    @property
    def K(self) -> int:
        return int(self.entries.shape[0])

    def __len__(self) -> int:
        return self.K

    def euclidean_norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def rkhs_norm(self, w: WeightSequence) -> float:
        return rkhs_norm(self, w)

    def tolist(self) -> list:
        return self.entries.tolist()


CoefficientLike = Union[CoefficientVector, Sequence[float], np.ndarray]


def as_array(b: CoefficientLike) -> np.ndarray:
    """把各种系数表示统一转换为一维浮点数组。"""
    if isinstance(b, CoefficientVector):
        return b.entries
    return np.asarray(b, dtype=float).reshape(-1)


class EllipsoidSpec(BaseModel):
    """椭球 E_K(B) = {b : Σ λ_k² b_k² ≤ B², b_k = 0 (k > K)}。

    Attributes:
        weights: 权重序列，其 max_index 即 K。
        radius: 半径 B。
    """
    model_config = ConfigDict(frozen=True)

    weights: WeightSequence
    radius: float = Field(gt=0, description="椭球半径 B")

    def contains(self, b: CoefficientLike) -> bool:
        return in_ellipsoid(b, self)


def _weights_for(b: np.ndarray, w: WeightSequence) -> np.ndarray:
    if b.shape[0] > w.max_index:
        raise DimensionError(f"系数长度 {b.shape[0]} 超过权重序列长度 {w.max_index}")
    return w.weights(b.shape[0])


def rkhs_inner(a: CoefficientLike, b: CoefficientLike, w: WeightSequence) -> float:
    """RKHS 内积 <a, b>_E = Σ λ_k² a_k b_k，较短的向量按零补齐。"""
    a, b = as_array(a), as_array(b)
    K = max(a.shape[0], b.shape[0])
    a = np.pad(a, (0, K - a.shape[0]))
    b = np.pad(b, (0, K - b.shape[0]))
    lam = _weights_for(a, w)
    return float(np.sum(lam ** 2 * a * b))


def rkhs_norm(b: CoefficientLike, w: WeightSequence) -> float:
    """计算 RKHS 范数 |b|_E = (Σ λ_k² b_k²)^{1/2}。

    Args:
        b: 系数向量，长度不得超过 w.max_index。
        w: 权重序列。

    Returns:
        非负实数，当且仅当 b 为零向量时为 0。

    Raises:
        DimensionError: b 比权重序列更长。
    """
    b = as_array(b)
    lam = _weights_for(b, w)
    return float(np.linalg.norm(lam * b))


def euclidean_norm(b: CoefficientLike) -> float:
    return float(np.linalg.norm(as_array(b)))


def euclidean_distance(b: CoefficientLike, phi: CoefficientLike) -> float:
    """|b − φ|₂，φ 比 b 长时把 Σ_{k>K} φ_k² 计入（b 的隐含零尾部）。"""
    b, phi = as_array(b), as_array(phi)
    K = max(b.shape[0], phi.shape[0])
    diff = np.pad(b, (0, K - b.shape[0])) - np.pad(phi, (0, K - phi.shape[0]))
    return float(np.linalg.norm(diff))


def in_ellipsoid(b: CoefficientLike, e: EllipsoidSpec) -> bool:
    """精确的成员判定：rkhs_norm(b) ≤ B，不带容差。"""
    return rkhs_norm(b, e.weights) <= e.radius


def decay_envelope_check(b: CoefficientLike, w: WeightSequence, B: float) -> bool:
    """检查逐项衰减包络 |b_k| ≤ B / λ_k。

    Σ λ_k² b_k² ≤ B² 时每一项都满足该不等式，因此椭球内的任何向量都应通过检查。

    Args:
        b: 系数向量。
        w: 权重序列。
        B: 椭球半径。

    Returns:
        所有分量都满足包络时返回 True。
    """
    b = as_array(b)
    lam = _weights_for(b, w)
    return bool(np.all(np.abs(b) <= B / lam))


def sample_ellipsoid(e: EllipsoidSpec, size: int, rng: np.random.Generator, max_draws: int = 1_000_000) -> np.ndarray:
    """在包围盒 [−B/λ_k, B/λ_k] 内均匀抽样并拒绝椭球外的点。

    Args:
        e: 目标椭球。
        size: 需要的样本数。
        rng: numpy 随机数生成器。
        max_draws: 抽样次数上限。

    Returns:
        形状为 (size, K) 的数组，每行都在 E_K(B) 内。
    """
    half_widths = e.radius / e.weights.weights()
    accepted = []
    draws = 0
    while len(accepted) < size:
        if draws >= max_draws:
            raise RuntimeError(f"拒绝抽样在 {max_draws} 次内未得到足够样本")
        candidate = rng.uniform(-half_widths, half_widths)
        draws += 1
        if in_ellipsoid(candidate, e):
            accepted.append(candidate)
    return np.array(accepted).reshape(size, -1)
