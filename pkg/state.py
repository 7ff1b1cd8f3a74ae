"""
state.py
─────────
定义 LangGraph 的全局共享状态。

数据流向：
  ExperimentConfig → prepare → <实验节点> → judge → END
                        │            │            │
                        ↓            ↓            ↓
                      plan      checks/results   verdict/exit_code
"""

from typing import Any, Literal, Optional, TypedDict


# ── 实验节点输出的数据结构 ────────────────────────────────────────────────────


class CheckResult(TypedDict):
    """单条可判定的检查（PASS/FAIL 的最小单位）"""

    name: str
    passed: bool
    measured: Any  # 实测值（数值或列表）
    expected: str  # 可读的判据，如 "∈ [1.7, 2.3]"
    detail: str


class Artifact(TypedDict):
    """CSV 产物：表头 + 行"""

    name: str
    header: list[str]
    rows: list[list]


class RunError(TypedDict):
    """不收敛 / 拒绝率超限等运行期失败（退出码 3）"""

    kind: str
    message: str
    data: dict


# ── 全局状态 ──────────────────────────────────────────────────────────────────


class ExperimentState(TypedDict):
    """
    一次实验运行的全局状态

    除 metadata 外，所有字段都只依赖 (config, seed)，
    因此 report.json 可以逐字节复现。
    """

    # ── 输入 ──────────────────────────────────────────────
    config: dict  # ExperimentConfig.to_dict()
    experiment: str
    params: dict  # 合并默认值之后的参数
    seed: int

    # ── prepare 输出 ──────────────────────────────────────
    threads: int
    plan: dict

    # ── 实验节点输出 ──────────────────────────────────────
    checks: list[CheckResult]
    results: dict
    artifacts: list[Artifact]
    ensembles: dict  # 名称 → SampleEnsemble，写成二进制容器，不进 report.json
    warnings: list[str]
    error: Optional[RunError]

    # ── judge 输出 ────────────────────────────────────────
    verdict: Optional[Literal["PASS", "FAIL", "ERROR"]]
    exit_code: int
