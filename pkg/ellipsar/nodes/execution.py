"""执行节点，负责运行当前实验单元的全部重复。

parallelism 为 1 时在当前进程内顺序执行；否则使用进程池。结果总是按重复编号
排序，保证汇总与并行度无关。
"""
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List

from ellipsar.harness import Design, ReplicationOutcome, run_replication_safe
from ellipsar.state import ExperimentState
from ellipsar.utils import setup_logger

logger = setup_logger("execution_node")


def run_cell_replications(cfg, design: Design, phi_bar: float, k0: int) -> List[ReplicationOutcome]:
    """运行一个单元的全部重复，返回按重复编号排序的结果。"""
    jobs = [(cfg, design, phi_bar, k0, r) for r in range(cfg.replications)]
    if cfg.parallelism == 1:
        outcomes = [run_replication_safe(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as executor:
            outcomes = list(executor.map(run_replication_safe, jobs))
    return sorted(outcomes, key=lambda o: o.replication)


def execute_cell(state: ExperimentState) -> Dict[str, Any]:
    """执行 current_cell_index 指向的单元。

    Args:
        state: 当前的实验状态。

    Returns:
        更新后的 cells、current_cell_index、outcomes 与 errors。
    """
    cfg = state["experiment"]
    idx = state["current_cell_index"]
    cells = [dict(cell) for cell in state["cells"]]
    cell = cells[idx]

    logger.info(f"正在执行单元 {idx + 1}/{len(cells)}: {cell['id']}")
    outcomes = run_cell_replications(cfg, Design(cell["design"]), cell["phi_bar"], cell["k0"])

    errors = [o.error for o in outcomes if o.error]
    for message in errors:
        logger.error(message)
    cell["status"] = "incomplete" if errors else "completed"
    if errors:
        logger.warning(f"单元 {cell['id']} 有 {len(errors)} 次重复失败，标记为未完成")

    return {
        "cells": cells,
        "current_cell_index": idx + 1,
        "outcomes": {cell["id"]: outcomes},
        "errors": errors,
    }
