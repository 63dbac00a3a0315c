"""状态定义模块，定义了实验工作流在执行过程中维护的状态结构。

每个实验单元（design × φ̄ × K₀）是一个 CellTask，执行节点逐个推进，
各单元的重复结果通过 update_dict 归并到 outcomes 中。
"""
import operator
from typing import Annotated, Any, Dict, List, Optional, TypedDict


class CellTask(TypedDict):
    """实验单元结构。

    Attributes:
        id: 单元的唯一标识，例如 "short_memory/0.75/100"。
        design: 数据生成过程类型。
        phi_bar: 系数总和 φ̄。
        k0: 真实阶数 K₀。
        status: 当前状态（pending, completed, incomplete）。
    """
    id: str
    design: str
    phi_bar: float
    k0: int
    status: str  # pending, completed, incomplete


def update_dict(existing: Dict[str, Any], new: Dict[str, Any]) -> Dict[str, Any]:
    """合并两个字典，用于状态更新。"""
    return {**existing, **new}


def cell_id(design: str, phi_bar: float, k0: int) -> str:
    return f"{design}/{phi_bar:g}/{k0}"


class ExperimentState(TypedDict):
    """实验工作流的全局状态结构。

    Attributes:
        experiment: 解析后的 ExperimentConfig。
        cells: 规划出的实验单元列表。
        current_cell_index: 下一个待执行单元的索引。
        outcomes: 单元 id → 按重复编号排序的 ReplicationOutcome 列表。
        errors: 失败重复的描述。
        started_at: 起始时间（time.perf_counter）。
        result: 汇总后的 ExperimentResult。
    """
    experiment: Any
    cells: List[CellTask]
    current_cell_index: int
    outcomes: Annotated[Dict[str, List[Any]], update_dict]
    errors: Annotated[List[str], operator.add]
    started_at: float
    result: Optional[Any]
