"""椭球约束 AR 估计的 API 服务。

该模块使用 FastAPI 提供 RESTful 接口：模拟序列、在给定序列上拟合约束模型、
以及同步运行小规模的相对 MSE 实验。服务不做任何持久化。
"""
import math
from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, ValidationError

from ellipsar import __version__
from ellipsar.errors import EllipsarError, UsageError
from ellipsar.harness import Design, ExperimentConfig, emit, fit_series, process_spec, run_experiment
from ellipsar.simulate import SeriesSample, simulate
from ellipsar.utils import setup_logger

app = FastAPI(title="Ellipsoid-Constrained AR Estimation API", version=__version__)
logger = setup_logger("api", "logs/api.log")


class SimulateRequest(BaseModel):
    """模拟序列的请求模型。

    Attributes:
        design: short_memory 或 long_memory。
        phi_bar: 系数总和 φ̄。
        k0: 真实阶数 K₀。
        n: 有效样本量。
        K: 滞后预算。
        warmup: 预热长度。
        seed: 随机种子。
        frac_d: 长记忆设计的分数差分参数。
    """
    design: Design = Design.short_memory
    phi_bar: float = 0.75
    k0: int = Field(default=100, ge=1)
    n: int = Field(default=1000, ge=1)
    K: int = Field(default=1, ge=1)
    warmup: int = Field(default=1000, ge=0)
    seed: int = Field(default=0, ge=0)
    frac_d: float = 0.49


class FitRequest(BaseModel):
    """拟合请求模型。values 按时间顺序排列，K 缺省为 2·K_AIC。"""
    values: List[float] = Field(min_length=8)
    K: Optional[int] = Field(default=None, ge=1)
    weight_exponent: float = Field(default=0.501, gt=0.5)
    tau: Optional[float] = Field(default=None, ge=0)
    radius: Optional[float] = Field(default=None, gt=0)
    grid_size: int = Field(default=15, ge=1)


class ExperimentRequest(BaseModel):
    """实验请求模型，字段与 ExperimentConfig 相同，未给出的使用默认值。"""
    config: Dict[str, Any] = Field(default_factory=dict)


def _fail(exc: Exception):
    if isinstance(exc, (UsageError, ValidationError)):
        logger.warning(f"请求参数错误: {exc}")
        raise HTTPException(status_code=422, detail=str(exc))
    if isinstance(exc, EllipsarError):
        logger.warning(f"请求无法完成: {exc}")
        raise HTTPException(status_code=422, detail=str(exc))
    logger.error(f"内部错误: {exc}")
    raise HTTPException(status_code=500, detail=str(exc))


def _json_safe(row: Dict[str, Any]) -> Dict[str, Any]:
    # 未完成单元的 NaN 不能直接序列化为 JSON
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in row.items()}


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/series/simulate")
def simulate_series(request: SimulateRequest):
    """模拟一条序列。

    Returns:
        {"t": [...], "value": [...]}。

    Raises:
        HTTPException: 参数不合法（422）或内部错误（500）。
    """
    logger.info(f"模拟请求: design={request.design.value}, φ̄={request.phi_bar}, K0={request.k0}, n={request.n}")
    try:
        cfg = ExperimentConfig(design=[request.design], phi_bar=[request.phi_bar], k0=[request.k0], frac_d=request.frac_d)
        spec = process_spec(cfg, request.design, request.phi_bar, request.k0)
        sample = simulate(spec, n=request.n, K=request.K, warmup=request.warmup, seed=request.seed)
    except Exception as e:
        _fail(e)
    return {"t": sample.t_index.tolist(), "value": sample.values.tolist()}


@app.post("/series/fit")
def fit(request: FitRequest):
    """在给定序列上拟合约束（或惩罚）AR 模型。

    Returns:
        系数、τ、df、残差方差、K_AIC 与 B 网格轨迹。
    """
    logger.info(f"拟合请求: {len(request.values)} 个观测, K={request.K}")
    try:
        sample = SeriesSample.from_values(request.values, K=1)
        summary = fit_series(
            sample,
            K=request.K,
            weight_exponent=request.weight_exponent,
            tau=request.tau,
            radius=request.radius,
            grid_size=request.grid_size,
        )
    except Exception as e:
        _fail(e)
    result = summary.fit
    return {
        "mode": summary.mode,
        "k_aic": summary.k_aic,
        "K": result.K,
        "coeffs": result.coeffs.tolist(),
        "tau": result.tau,
        "binding": result.binding,
        "radius": result.radius,
        "df": result.df,
        "resid_var": result.resid_var,
        "warning": result.warning,
        "grid": [{"B": b, "criterion": c} for b, c in summary.grid],
    }


@app.post("/experiments/run")
def run(request: ExperimentRequest):
    """同步运行一次实验，只适合小规模配置。

    Returns:
        各单元结果、CSV 文本以及是否全部完成。
    """
    logger.info(f"实验请求: {request.config}")
    try:
        cfg = ExperimentConfig(**request.config)
        result = run_experiment(cfg)
    except Exception as e:
        _fail(e)
    logger.info(f"实验完成，耗时 {result.wall_time:.1f} 秒")
    return {
        "complete": result.complete,
        "cells": [_json_safe(cell.model_dump(mode="json")) for cell in result.cells],
        "csv": emit(result, "csv"),
        "failures": result.failures,
    }


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
