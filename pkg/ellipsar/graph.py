"""实验工作流图定义模块。

使用 langgraph 构建实验的执行逻辑：规划实验单元，逐个单元执行全部重复，
最后汇总为 ExperimentResult。
"""
from langgraph.graph import END, START, StateGraph

from ellipsar.nodes.execution import execute_cell
from ellipsar.nodes.planning import plan_cells
from ellipsar.nodes.reporting import generate_report
from ellipsar.state import ExperimentState
from ellipsar.utils import setup_logger

logger = setup_logger("graph")


def should_continue_execution(state: ExperimentState) -> str:
    """判断是否继续执行下一个单元。

    失败的重复只会让对应单元标记为未完成，不会中断工作流。

    Args:
        state: 当前的实验状态。

    Returns:
        "execute" 或 "report"。
    """
    if state["current_cell_index"] < len(state["cells"]):
        return "execute"
    logger.info("所有实验单元已执行完毕，准备汇总结果。")
    return "report"


def create_graph():
    """创建并编译实验工作流图。

    Returns:
        编译后的 CompiledGraph 对象。
    """
    workflow = StateGraph(ExperimentState)

    workflow.add_node("plan", plan_cells)
    workflow.add_node("execute", execute_cell)
    workflow.add_node("report", generate_report)

    workflow.add_edge(START, "plan")
    # 空网格直接进入汇总
    workflow.add_conditional_edges(
        "plan",
        should_continue_execution,
        {"execute": "execute", "report": "report"},
    )
    workflow.add_conditional_edges(
        "execute",
        should_continue_execution,
        {"execute": "execute", "report": "report"},
    )
    workflow.add_edge("report", END)

    return workflow.compile()
