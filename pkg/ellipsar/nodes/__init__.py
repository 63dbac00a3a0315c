"""实验工作流的节点：规划、执行与汇总。"""
