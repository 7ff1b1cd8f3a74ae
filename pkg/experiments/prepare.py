"""
experiments/prepare.py
───────────────────────
工作流的第一个节点：确定线程数并生成运行计划。

计划只用于展示与报告（分块数、每块试验数），
不影响数据本身：同一 (config, seed) 在任何线程数下结果相同。
"""

import config
from state import ExperimentState
from utils.chunker import get_block_info
from utils.progress import progress

# 各实验计划里展示的“试验数”参数
_TRIAL_KEYS = {
    "tail": "n",
    "diameter": "n",
    "product": "n",
    "hanson_wright": "n",
    "xdy": "trials",
    "norm_degree": "trials",
    "resolvent": "trials",
    "moments": "n",
}


def prepare_node(state: ExperimentState) -> dict:
    progress.start("prepare")
    experiment, params = state["experiment"], state["params"]
    threads = state["config"].get("threads") or config.THREADS

    key = _TRIAL_KEYS.get(experiment)
    trials = params.get(key) if key else None
    plan = {"experiment": experiment, "threads": threads}
    if isinstance(trials, int) and trials > 0:
        plan.update(get_block_info(trials, 1))
    if config.DEBUG:
        print(f"[DEBUG] plan: {plan}")

    progress.done("prepare", f"{threads} 线程" + (f"，{plan['blocks']} 块" if "blocks" in plan else ""))
    return {"threads": threads, "plan": plan}
