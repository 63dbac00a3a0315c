"""异常定义模块，集中定义库内所有操作可能抛出的错误类型。

每个异常同时继承 EllipsarError 与一个标准库异常，调用方既可以统一捕获
EllipsarError，也可以按 ValueError / RuntimeError 等常规类型处理。
"""
from typing import Optional

import numpy as np


class EllipsarError(Exception):
    """所有 ellipsar 异常的基类。"""


class DimensionError(EllipsarError, ValueError):
    """长度、形状不匹配或数据量不足。"""


class DomainError(EllipsarError, ValueError):
    """标量参数超出定义域，例如 τ < 0 或 |d| ≥ 0.5。"""


class RankError(EllipsarError, np.linalg.LinAlgError):
    """正规方程奇异，无法求解。"""


class NonstationaryError(EllipsarError, ValueError):
    """AR 多项式存在单位圆上或圆内的根。"""


class TruncationError(EllipsarError, RuntimeError):
    """MA 展开在给定项数内未达到尾部容差。"""


class SolverError(EllipsarError, RuntimeError):
    """拉格朗日乘子求根失败。

    Attributes:
        radius: 出错时使用的椭球半径 B（由 select_B 附加）。
    """

    def __init__(self, message: str, radius: Optional[float] = None):
        super().__init__(message)
        self.radius = radius


class ReplicationError(EllipsarError, RuntimeError):
    """单次蒙特卡洛重复失败。

    Attributes:
        replication: 重复编号。
        seed: 该重复使用的随机种子。
    """

    def __init__(self, message: str, replication: int, seed: int):
        super().__init__(f"{message} (replication={replication}, seed={seed})")
        self.replication = replication
        self.seed = seed


class UsageError(EllipsarError, ValueError):
    """命令行或配置文件用法错误。

    Attributes:
        key: 出错的配置项名称。
    """

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
