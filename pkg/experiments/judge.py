"""
experiments/judge.py
─────────────────────
判定节点：工作流的最后一步，把检查列表折叠成一个结论和退出码。

  error 不为空          → ERROR / 3（不收敛、拒绝率超限）
  所有检查通过（且非空） → PASS  / 0
  其他                  → FAIL  / 2
"""

from typing import Optional

from config import EXIT_CONVERGENCE, EXIT_FAIL, EXIT_PASS
from state import ExperimentState
from utils.progress import progress


def decide(checks: list, error: Optional[dict]) -> tuple:
    """(verdict, exit_code)"""
    if error:
        return "ERROR", EXIT_CONVERGENCE
    if checks and all(c["passed"] for c in checks):
        return "PASS", EXIT_PASS
    return "FAIL", EXIT_FAIL


def judge_node(state: ExperimentState) -> dict:
    progress.start("judge")
    checks = state.get("checks", [])
    verdict, exit_code = decide(checks, state.get("error"))
    failed = [c["name"] for c in checks if not c["passed"]]
    if verdict == "ERROR":
        progress.fail("judge", state["error"]["message"])
    else:
        progress.done("judge", f"{verdict}" + (f"（失败：{', '.join(failed[:5])}）" if failed else ""))
    return {"verdict": verdict, "exit_code": exit_code}
