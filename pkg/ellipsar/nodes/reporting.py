"""汇总节点，把各单元的重复结果聚合为 ExperimentResult。"""
import math
import time
from typing import Any, Dict, List

import numpy as np

from ellipsar.harness import CellResult, Design, ExperimentResult, ReplicationOutcome
from ellipsar.state import ExperimentState
from ellipsar.utils import setup_logger

logger = setup_logger("reporting_node")


def summarize_ratios(ratios: List[float]):
    """返回 (均值, 标准误)；标准误为 sd(ddof=1)/√reps，只有一次重复时为 0。"""
    values = np.asarray(ratios, dtype=float)
    if values.size == 0:
        return math.nan, math.nan
    if values.size == 1:
        return float(values[0]), 0.0
    return float(np.mean(values)), float(np.std(values, ddof=1) / np.sqrt(values.size))


def _diagnostic_rows(cell: Dict[str, Any], outcomes: List[ReplicationOutcome]) -> List[Dict[str, Any]]:
    rows = []
    for outcome in outcomes:
        for fit in outcome.fits:
            rows.append({
                "design": cell["design"],
                "phi_bar": cell["phi_bar"],
                "K0": cell["k0"],
                "replication": outcome.replication,
                "seed": outcome.seed,
                "k_aic": outcome.k_aic,
                "multiplier": fit.multiplier,
                "K": fit.K,
                "B": fit.radius,
                "tau": fit.tau,
                "binding": fit.binding,
                "df": fit.df,
                "ratio": fit.ratio,
            })
    return rows


def generate_report(state: ExperimentState) -> Dict[str, Any]:
    """聚合每个单元、每个滞后倍数的比值均值与标准误。

    存在失败重复的单元标记为未完成，不会用剩余重复的平均值冒充完整结果。

    Args:
        state: 当前的实验状态。

    Returns:
        包含 result 的字典。
    """
    cfg = state["experiment"]
    cells: List[CellResult] = []
    diagnostics: List[Dict[str, Any]] = []

    for cell in state["cells"]:
        outcomes = state["outcomes"].get(cell["id"], [])
        complete = cell["status"] == "completed" and len(outcomes) == cfg.replications
        diagnostics.extend(_diagnostic_rows(cell, outcomes))
        for multiplier in cfg.lag_multipliers:
            ratios = [fit.ratio for o in outcomes if o.error is None for fit in o.fits if fit.multiplier == multiplier]
            mean_ratio, stderr = summarize_ratios(ratios) if complete else (math.nan, math.nan)
            cells.append(CellResult(
                design=Design(cell["design"]),
                phi_bar=cell["phi_bar"],
                k0=cell["k0"],
                multiplier=multiplier,
                mean_ratio=mean_ratio,
                stderr=stderr,
                reps=len(ratios),
                complete=complete,
            ))

    wall_time = time.perf_counter() - state["started_at"]
    logger.info(f"实验完成，共 {len(cells)} 个结果单元，耗时 {wall_time:.1f} 秒")
    result = ExperimentResult(
        cells=cells,
        replications=cfg.replications,
        config=cfg.model_dump(mode="json"),
        wall_time=wall_time,
        diagnostics=diagnostics,
        failures=list(state["errors"]),
    )
    return {"result": result}
