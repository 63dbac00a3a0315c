"""ellipsar：高阶自回归模型的椭球约束与 RKHS 惩罚估计。

模块划分：
    model    ：权重序列、系数向量与椭球
    simulate ：短记忆 AR 与 ARFIMA 模拟、特征根与自协方差
    estimate ：惩罚 / 约束求解、B 网格与 AIC 选阶
    forecast ：一步预测评估与一致误差界
    harness  ：蒙特卡洛实验配置、执行与输出
"""
from ellipsar.errors import (
    DimensionError,
    DomainError,
    EllipsarError,
    NonstationaryError,
    RankError,
    ReplicationError,
    SolverError,
    TruncationError,
    UsageError,
)
from ellipsar.estimate import (
    FitResult,
    RegressionData,
    SelectionResult,
    build_design,
    constrained_solve,
    degrees_of_freedom,
    fit_ols_ar,
    ridge_solve,
    select_aic_order,
    select_B,
)
from ellipsar.forecast import EvaluationReport, evaluate, predict, uniform_bound_diagnostic
from ellipsar.model import (
    CoefficientVector,
    EllipsoidSpec,
    WeightSequence,
    euclidean_norm,
    in_ellipsoid,
    rkhs_norm,
)
from ellipsar.simulate import (
    ArfimaSpec,
    SeriesSample,
    ShortMemorySpec,
    ar_to_ma,
    autocovariance,
    char_root_check,
    fractional_coeffs,
    simulate_arfima,
    simulate_short_memory,
)

__version__ = "0.1.0"
