"""规划节点，把配置展开为实验单元序列。"""
import itertools
from typing import Any, Dict

from ellipsar.state import CellTask, ExperimentState, cell_id
from ellipsar.utils import setup_logger

logger = setup_logger("planning_node")


def plan_cells(state: ExperimentState) -> Dict[str, Any]:
    """按 design、φ̄、K₀ 的顺序生成全部实验单元，并初始化为 pending。

    Args:
        state: 当前的实验状态。

    Returns:
        包含 cells 与 current_cell_index 的字典。
    """
    cfg = state["experiment"]
    cells = [
        CellTask(id=cell_id(design.value, phi_bar, k0), design=design.value, phi_bar=phi_bar, k0=k0, status="pending")
        for design, phi_bar, k0 in itertools.product(cfg.design, cfg.phi_bar, cfg.k0)
    ]
    logger.info(f"共规划 {len(cells)} 个实验单元，每个单元 {cfg.replications} 次重复，并行度 {cfg.parallelism}")
    return {"cells": cells, "current_cell_index": 0}
