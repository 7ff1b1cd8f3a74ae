"""
graph.py
─────────
LangGraph 图定义：包含所有节点、边和路由逻辑

每次运行只走一条路径：

  ┌──────────────────────────────────────────────────────┐
  │ START                                                 │
  │   ↓                                                   │
  │ 🧭 prepare  （线程数、分块计划）                        │
  │   ↓                                                   │
  │  [条件边：按 state["experiment"] 分发]                  │
  │   ├─ tail / diameter / product / hanson_wright         │
  │   ├─ xdy / norm_degree / resolvent                     │
  │   └─ robust / moments                                  │
  │   ↓                                                   │
  │ ⚖️  judge  （PASS / FAIL / ERROR + 退出码）             │
  │   ↓                                                   │
  │  END                                                  │
  └──────────────────────────────────────────────────────┘
"""

from langgraph.graph import END, StateGraph

from experiments import EXPERIMENT_NODES
from experiments.judge import judge_node
from experiments.prepare import prepare_node
from state import ExperimentState


# ──────────────────────────────────────────────────────────────────────────────
# 路由函数
# ──────────────────────────────────────────────────────────────────────────────


def route_after_prepare(state: ExperimentState) -> str:
    """prepare 之后：进入配置里指定的实验节点"""
    return state["experiment"]


# ──────────────────────────────────────────────────────────────────────────────
# 图构建
# ──────────────────────────────────────────────────────────────────────────────


def build_workflow():
    """构建并编译实验工作流图"""
    workflow = StateGraph(ExperimentState)

    # ── 注册节点 ──────────────────────────────────────────────────────────────
    workflow.add_node("prepare", prepare_node)
    for name, node in EXPERIMENT_NODES.items():
        workflow.add_node(name, node)
    workflow.add_node("judge", judge_node)

    # ── 入口 ──────────────────────────────────────────────────────────────────
    workflow.set_entry_point("prepare")

    # ── prepare 后：条件边（按实验分发）──────────────────────────────────────
    workflow.add_conditional_edges(
        "prepare",
        route_after_prepare,
        {name: name for name in EXPERIMENT_NODES},
    )

    # ── 每个实验之后都进入判定 ───────────────────────────────────────────────
    for name in EXPERIMENT_NODES:
        workflow.add_edge(name, "judge")
    workflow.add_edge("judge", END)

    return workflow.compile()


_compiled_workflow = None


def get_workflow():
    """获取编译好的工作流（单例）"""
    global _compiled_workflow
    if _compiled_workflow is None:
        _compiled_workflow = build_workflow()
    return _compiled_workflow
