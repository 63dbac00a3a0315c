"""蒙特卡洛实验模块，把模拟、估计与评估串成完整的相对 MSE 研究。

每次重复 r 使用种子 base_seed + r：模拟 warmup + N + test_size 个观测，
前 N 个用于训练（AIC 基准与椭球约束模型），其余用于一步预测评估。
实验流程由 ellipsar.graph 中的 LangGraph 工作流驱动。
"""
import argparse
import json
import math
import time
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from ellipsar.errors import ReplicationError, UsageError
from ellipsar.estimate import build_design, constrained_solve, default_b_grid, ridge_solve, select_aic_order, select_B
from ellipsar.forecast import evaluate
from ellipsar.model import EllipsoidSpec, WeightSequence
from ellipsar.simulate import (
    ArfimaSpec,
    ProcessSpec,
    SeriesSample,
    ShortMemorySpec,
    char_root_check,
    linear_ma_coeffs,
    short_memory_coeffs,
    simulate,
)
from ellipsar.utils import get_settings, render_template, setup_logger

logger = setup_logger("harness")

CSV_COLUMNS = ["design", "phi_bar", "K0", "multiplier", "mean_ratio", "stderr", "reps"]
DIAGNOSTIC_COLUMNS = ["design", "phi_bar", "K0", "replication", "seed", "k_aic", "multiplier", "K", "B", "tau", "binding", "df", "ratio"]
# 实验中 K_AIC 的最大候选阶数
HARNESS_AIC_MAX_ORDER = 5


class Design(str, Enum):
    short_memory = "short_memory"
    long_memory = "long_memory"


def _split_list(value):
    # 命令行传入 "2,4" 这类逗号分隔字符串，或单个标量
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


@lru_cache(maxsize=64)
def _short_memory_roots_ok(phi_bar: float, k0: int) -> Tuple[bool, float]:
    check = char_root_check(short_memory_coeffs(ShortMemorySpec(total_mass=phi_bar, true_order=k0)))
    return check.passes, check.min_modulus


class ExperimentConfig(BaseSettings):
    """实验配置，默认值为完整的实验网格（重复次数取 200）。

    优先级：构造参数（命令行 / 配置文件）> ELLIPSAR_ 环境变量 > 默认值。
    design、k0、phi_bar 可以是单个值或列表，三者的笛卡尔积构成实验单元。
    """
    model_config = SettingsConfigDict(env_prefix="ELLIPSAR_", extra="forbid", frozen=True)

    design: List[Design] = Field(default_factory=lambda: [Design.short_memory, Design.long_memory], min_length=1)
    k0: List[int] = Field(default_factory=lambda: [100, 1000], min_length=1)
    phi_bar: List[float] = Field(default_factory=lambda: [0.75, 0.99], min_length=1)
    sample_size: int = Field(default=1000, gt=0, description="训练样本量 N")
    warmup: int = Field(default=1000, ge=0, description="预热观测数")
    test_size: int = Field(default=1000, gt=0, description="测试样本量")
    replications: int = Field(default=200, gt=0, description="重复次数")
    lag_multipliers: List[int] = Field(default_factory=lambda: [2, 4], min_length=1)
    weight_exponent: float = Field(default=0.501, gt=0.5)
    weight_scale: float = Field(default=1.0, gt=0)
    base_seed: int = Field(default=0, ge=0)
    parallelism: int = Field(default_factory=lambda: get_settings().default_parallelism, ge=1)
    innovation_sd: float = Field(default=1.0, gt=0)
    frac_d: float = Field(default=0.49, gt=-0.5, lt=0.5)
    ma_order: int = Field(default=5, ge=0, le=10)
    frac_truncation: int = Field(default=1000, ge=1)
    p_max: Optional[int] = Field(default=HARNESS_AIC_MAX_ORDER, ge=1, description="K_AIC 的最大候选阶数；None 时按 estimate.default_p_max")
    b_grid_size: int = Field(default=15, ge=1)
    b_grid_span: float = Field(default=10.0, gt=1.0)

    @field_validator("design", "k0", "phi_bar", "lag_multipliers", mode="before")
    @classmethod
    def _listify(cls, value):
        return _split_list(value)

    @field_validator("k0", "lag_multipliers")
    @classmethod
    def _positive_ints(cls, value: List[int]) -> List[int]:
        if any(v < 1 for v in value):
            raise ValueError("取值必须至少为 1")
        return value

    @field_validator("phi_bar")
    @classmethod
    def _roots_outside_unit_circle(cls, value: List[float], info: ValidationInfo) -> List[float]:
        for phi_bar in value:
            if phi_bar <= 0:
                raise ValueError(f"φ̄={phi_bar} 必须为正")
            for k0 in info.data.get("k0", []):
                ok, modulus = _short_memory_roots_ok(float(phi_bar), int(k0))
                if not ok:
                    raise ValueError(f"φ̄={phi_bar}, K0={k0} 的 AR 多项式最小根模为 {modulus:.6g}，不在单位圆外")
        return value

    @property
    def cell_count(self) -> int:
        return len(self.design) * len(self.phi_bar) * len(self.k0)


class MultiplierOutcome(BaseModel):
    """一次重复中某个滞后倍数的拟合与评估结果。"""
    multiplier: int
    K: int
    radius: float
    tau: float
    binding: bool
    df: float
    ratio: float


class ReplicationOutcome(BaseModel):
    """一次重复的结果；失败时 error 非空。"""
    replication: int
    seed: int
    k_aic: Optional[int] = None
    fits: List[MultiplierOutcome] = Field(default_factory=list)
    error: Optional[str] = None


class CellResult(BaseModel):
    """结果表的一个单元：design × φ̄ × K₀ × 倍数。"""
    model_config = ConfigDict(frozen=True)

    design: Design
    phi_bar: float
    k0: int
    multiplier: int
    mean_ratio: float
    stderr: float
    reps: int
    complete: bool = True


class ExperimentResult(BaseModel):
    """实验汇总结果。

    Attributes:
        cells: 按 design、φ̄、K₀、倍数排序的单元。
        replications: 每个单元应聚合的重复数。
        config: 解析后的配置回显。
        wall_time: 运行耗时（秒），不写入 CSV。
        diagnostics: 每次重复、每个倍数一行的诊断记录。
        failures: 失败重复的描述。
    """
    cells: List[CellResult] = Field(default_factory=list)
    replications: int = 0
    config: Dict[str, Any] = Field(default_factory=dict)
    wall_time: float = 0.0
    diagnostics: List[Dict[str, Any]] = Field(default_factory=list)
    failures: List[str] = Field(default_factory=list)

    @property
    def complete(self) -> bool:
        return all(cell.complete for cell in self.cells)


def replication_seed(base_seed: int, replication: int) -> int:
    """第 r 次重复的种子：base_seed + r。"""
    return base_seed + replication


def process_spec(cfg: ExperimentConfig, design: Design, phi_bar: float, k0: int) -> ProcessSpec:
    """由配置与单元参数构造数据生成过程。"""
    ar = ShortMemorySpec(total_mass=phi_bar, true_order=k0, innovation_sd=cfg.innovation_sd)
    if Design(design) is Design.short_memory:
        return ar
    return ArfimaSpec(ar=ar, ma_coeffs=linear_ma_coeffs(cfg.ma_order), frac_d=cfg.frac_d, frac_truncation=cfg.frac_truncation)


def run_replication(cfg: ExperimentConfig, design: Design, phi_bar: float, k0: int, replication: int) -> ReplicationOutcome:
    """执行一次重复：模拟、AIC 基准、各倍数下的约束拟合与评估。

    Raises:
        ReplicationError: 任意一步失败，附带重复编号与种子。
    """
    seed = replication_seed(cfg.base_seed, replication)
    try:
        spec = process_spec(cfg, design, phi_bar, k0)
        path = simulate(spec, n=cfg.sample_size + cfg.test_size - 1, K=1, warmup=cfg.warmup, seed=seed).values
        train = SeriesSample.from_values(path[:cfg.sample_size], K=1, rng_seed=seed)
        test = path[cfg.sample_size:]

        aic = select_aic_order(train, cfg.p_max)
        k_aic = aic.chosen_order
        benchmark = aic.chosen

        fits = []
        for multiplier in cfg.lag_multipliers:
            K = multiplier * k_aic
            data = build_design(train.with_lag_budget(K))
            w = WeightSequence(exponent=cfg.weight_exponent, scale=cfg.weight_scale, max_index=K)
            grid = default_b_grid(data, w, size=cfg.b_grid_size, span=cfg.b_grid_span)
            selection = select_B(data, w, grid)
            report = evaluate(selection.chosen.coeffs, benchmark.coeffs, test)
            fits.append(MultiplierOutcome(
                multiplier=multiplier,
                K=K,
                radius=selection.chosen_value,
                tau=selection.chosen.tau,
                binding=selection.chosen.binding,
                df=selection.chosen.df,
                ratio=report.relative_improvement,
            ))
    except Exception as exc:
        raise ReplicationError(f"{Design(design).value} φ̄={phi_bar} K0={k0} 失败: {exc}", replication, seed) from exc
    return ReplicationOutcome(replication=replication, seed=seed, k_aic=k_aic, fits=fits)


def run_replication_safe(args: Tuple[ExperimentConfig, Design, float, int, int]) -> ReplicationOutcome:
    """供进程池调用的包装：失败转换为带 error 的结果而不是异常。"""
    cfg, design, phi_bar, k0, replication = args
    try:
        return run_replication(cfg, design, phi_bar, k0, replication)
    except ReplicationError as exc:
        return ReplicationOutcome(replication=exc.replication, seed=exc.seed, error=str(exc))


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """运行完整实验，对相同配置（包括并行度）逐位可复现。"""
    from ellipsar.graph import create_graph

    graph = create_graph()
    initial_state = {
        "experiment": cfg,
        "cells": [],
        "current_cell_index": 0,
        "outcomes": {},
        "errors": [],
        "started_at": time.perf_counter(),
        "result": None,
    }
    final_state = graph.invoke(initial_state, {"recursion_limit": cfg.cell_count + 10})
    return final_state["result"]


def _fmt(value: float, spec: str = "%.6f") -> str:
    return "NA" if value is None or not math.isfinite(value) else spec % value


def emit(result: ExperimentResult, format: str = "csv") -> str:
    """把实验结果渲染为 CSV 或按 K₀ 与倍数分列的定宽表。

    Args:
        result: 实验结果。
        format: "csv" 或 "table"。

    Returns:
        文本；未完成的单元显示为 NA。
    """
    if format == "csv":
        rows = [
            {
                "design": cell.design.value,
                "phi_bar": "%g" % cell.phi_bar,
                "K0": str(cell.k0),
                "multiplier": str(cell.multiplier),
                "mean_ratio": _fmt(cell.mean_ratio) if cell.complete else "NA",
                "stderr": _fmt(cell.stderr) if cell.complete else "NA",
                "reps": str(cell.reps),
            }
            for cell in result.cells
        ]
        return pd.DataFrame(rows, columns=CSV_COLUMNS).to_csv(index=False, lineterminator="\n")
    if format == "table":
        return _render_table(result)
    raise UsageError(f"未知的输出格式: {format}", key="format")


def _render_table(result: ExperimentResult) -> str:
    k0s = sorted({cell.k0 for cell in result.cells})
    multipliers = sorted({cell.multiplier for cell in result.cells})
    columns = [(k0, m) for k0 in k0s for m in multipliers]
    lookup = {(c.design, c.phi_bar, c.k0, c.multiplier): c for c in result.cells}

    blocks = []
    for design in [d for d in Design if any(c.design is d for c in result.cells)]:
        rows = []
        for phi_bar in sorted({c.phi_bar for c in result.cells if c.design is design}):
            values = []
            for k0, m in columns:
                cell = lookup.get((design, phi_bar, k0, m))
                values.append("NA" if cell is None or not cell.complete else _fmt(cell.mean_ratio, "%.2f"))
            rows.append({"label": "phi_bar=%g" % phi_bar, "values": values})
        blocks.append({"title": design.value.replace("_", " ").title(), "rows": rows})

    return render_template(
        "table.txt",
        k0_header=[(k0, len(multipliers)) for k0 in k0s],
        multiplier_header=["%dK_AIC" % m for _, m in columns],
        blocks=blocks,
        replications=result.replications,
        complete=result.complete,
    )


def diagnostics_frame(result: ExperimentResult) -> pd.DataFrame:
    return pd.DataFrame(result.diagnostics, columns=DIAGNOSTIC_COLUMNS)


class _RaisingParser(argparse.ArgumentParser):
    """argparse 默认以退出码 2 结束进程，这里改为抛出 UsageError。"""

    def error(self, message):
        raise UsageError(message)


# 命令行参数 → 配置字段
FLAG_TO_FIELD = {
    "design": "design",
    "phi_bar": "phi_bar",
    "k0": "k0",
    "sample_size": "sample_size",
    "warmup": "warmup",
    "test_size": "test_size",
    "replications": "replications",
    "multipliers": "lag_multipliers",
    "weight_exponent": "weight_exponent",
    "seed": "base_seed",
    "parallelism": "parallelism",
    "p_max": "p_max",
    "frac_d": "frac_d",
    "frac_truncation": "frac_truncation",
}


def add_run_arguments(parser: argparse.ArgumentParser) -> argparse.ArgumentParser:
    """注册 `run` 子命令的参数。配置类参数的默认值均为 None，表示未在命令行指定。"""
    parser.add_argument("--config", help="JSON 配置文件")
    parser.add_argument("--design", help="short_memory,long_memory")
    parser.add_argument("--phi-bar", dest="phi_bar", help="例如 0.75,0.99")
    parser.add_argument("--k0", help="例如 100,1000")
    parser.add_argument("--sample-size", dest="sample_size")
    parser.add_argument("--warmup")
    parser.add_argument("--test-size", dest="test_size")
    parser.add_argument("--replications")
    parser.add_argument("--multipliers", help="例如 2,4")
    parser.add_argument("--weight-exponent", dest="weight_exponent")
    parser.add_argument("--seed")
    parser.add_argument("--parallelism")
    parser.add_argument("--p-max", dest="p_max")
    parser.add_argument("--frac-d", dest="frac_d")
    parser.add_argument("--frac-truncation", dest="frac_truncation")
    parser.add_argument("--format", choices=["csv", "table"], default="csv")
    parser.add_argument("--out", help="输出文件，缺省写到标准输出")
    parser.add_argument("--diagnostics", help="逐次重复的诊断 CSV")
    parser.add_argument("--strict", action="store_true", help="存在未完成单元时以退出码 2 结束")
    return parser


def parse_run_args(argv: Sequence[str]) -> argparse.Namespace:
    return add_run_arguments(_RaisingParser(prog="ellipsar run")).parse_args(list(argv))


def _load_config_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"无法读取配置文件: {exc}", key="config") from exc
    if not isinstance(payload, dict):
        raise UsageError("配置文件必须是 JSON 对象", key="config")
    unknown = sorted(set(payload) - set(ExperimentConfig.model_fields))
    if unknown:
        raise UsageError("未知的配置项", key=unknown[0])
    return payload


def config_from_namespace(ns: argparse.Namespace) -> ExperimentConfig:
    """合并配置文件与命令行参数：命令行 > 配置文件 > 环境变量 > 默认值。

    Raises:
        UsageError: 未知配置项或取值不合法，异常携带出错的配置项名称。
    """
    values: Dict[str, Any] = _load_config_file(ns.config) if getattr(ns, "config", None) else {}
    for flag, field in FLAG_TO_FIELD.items():
        flag_value = getattr(ns, flag, None)
        if flag_value is not None:
            values[field] = flag_value
    try:
        return ExperimentConfig(**values)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = str(first["loc"][0]) if first["loc"] else None
        raise UsageError(first["msg"], key=key) from exc


def parse_config(argv: Sequence[str]) -> ExperimentConfig:
    """由 `run` 子命令的参数列表得到 ExperimentConfig。"""
    return config_from_namespace(parse_run_args(argv))


class FitSummary(BaseModel):
    """`ellipsar fit` 的结果：单条序列上的约束或惩罚拟合。

    Attributes:
        N: 序列长度。
        k_aic: AIC 选出的阶数。
        mode: "b_grid"（网格选 B）、"radius"（固定 B）或 "ridge"（固定 τ）。
        weight_exponent: 权重指数。
        fit: 最终拟合。
        grid: B 网格的 (B, 准则值) 轨迹，非网格模式时为空。
    """
    N: int
    k_aic: Optional[int] = None
    mode: str
    weight_exponent: float
    fit: Any
    grid: List[Tuple[float, float]] = Field(default_factory=list)


def fit_series(
    sample: SeriesSample,
    K: Optional[int] = None,
    weight_exponent: float = 0.501,
    weight_scale: float = 1.0,
    tau: Optional[float] = None,
    radius: Optional[float] = None,
    grid_size: int = 15,
    grid_span: float = 10.0,
    p_max: Optional[int] = None,
) -> FitSummary:
    """在一条序列上拟合椭球约束 AR 模型。

    K 缺省为 2·K_AIC。给出 tau 时直接做惩罚估计，给出 radius 时做固定 B 的
    约束估计，否则在 B 网格上选择。
    """
    if tau is not None and radius is not None:
        raise UsageError("tau 与 radius 只能指定一个", key="tau")
    aic = select_aic_order(sample, p_max)
    k_aic = aic.chosen_order
    K = 2 * k_aic if K is None else K
    data = build_design(sample.with_lag_budget(K))
    w = WeightSequence(exponent=weight_exponent, scale=weight_scale, max_index=K)

    if tau is not None:
        fit, grid, mode = ridge_solve(data, w, tau), [], "ridge"
    elif radius is not None:
        fit, grid, mode = constrained_solve(data, EllipsoidSpec(weights=w, radius=radius)), [], "radius"
    else:
        selection = select_B(data, w, default_b_grid(data, w, size=grid_size, span=grid_span))
        fit, grid, mode = selection.chosen, selection.grid, "b_grid"
    logger.info(f"拟合完成: K={K}, K_AIC={k_aic}, τ={fit.tau:.6g}, df={fit.df:.3f}")
    return FitSummary(N=sample.N, k_aic=k_aic, mode=mode, weight_exponent=weight_exponent, fit=fit, grid=grid)


def render_fit(summary: FitSummary) -> str:
    fit = summary.fit
    return render_template(
        "fit.txt",
        N=summary.N,
        K=fit.K,
        weight_exponent=summary.weight_exponent,
        k_aic=summary.k_aic,
        mode=summary.mode,
        radius=fit.radius,
        tau=fit.tau,
        binding=fit.binding,
        df=fit.df,
        resid_var=fit.resid_var,
        rkhs_norm=fit.rkhs_norm_value,
        warning=fit.warning,
        coeffs=list(enumerate(fit.coeffs.tolist(), start=1)),
        grid=summary.grid,
    )
