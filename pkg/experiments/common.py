"""
experiments/common.py
──────────────────────
实验节点共用的小工具：

  - experiment_node：节点装饰器（进度打印、警告收集、不收敛/拒绝 → error）
  - check / in_range / ratio_check：构造 CheckResult
  - artifact：构造 CSV 产物
  - vector_model / diagonal_model：从参数字典构造模型
"""

import functools
import math
import warnings
from typing import Callable, Optional, Sequence

import numpy as np

from config import DEBUG
from services.errors import (
    AdmissibilityError,
    ConvergenceError,
    DomainError,
    InsufficientDataError,
    RejectionError,
    WindowError,
)
from services.generators import DiagonalModel, VectorModel
from state import Artifact, CheckResult, ExperimentState
from utils.progress import progress


# ── 检查项 ────────────────────────────────────────────────────────────────────


def check(name: str, passed: bool, measured, expected: str, detail: str = "") -> CheckResult:
    return {
        "name": name,
        "passed": bool(passed),
        "measured": measured,
        "expected": expected,
        "detail": detail,
    }


def in_range(name: str, value: float, lo: Optional[float], hi: Optional[float], detail: str = "") -> CheckResult:
    """lo / hi 为 None 表示该侧不设限"""
    ok = math.isfinite(value) and (lo is None or value >= lo) and (hi is None or value <= hi)
    left = "-∞" if lo is None else f"{lo:g}"
    right = "+∞" if hi is None else f"{hi:g}"
    return check(name, ok, float(value), f"∈ [{left}, {right}]", detail)


def ratio_check(name: str, values: Sequence[float], max_ratio: float, detail: str = "") -> CheckResult:
    """max / min ≤ max_ratio（跨维度的稳定性）"""
    values = [float(v) for v in values]
    positive = all(v > 0 for v in values)
    ratio = max(values) / min(values) if positive else math.inf
    return check(name, positive and ratio <= max_ratio, ratio, f"max/min ≤ {max_ratio:g}", detail or str(values))


def relative_spread_check(name: str, values: Sequence[float], tolerance: float) -> CheckResult:
    """每个值都在均值的 ±tolerance 倍以内"""
    values = np.asarray(values, dtype=float)
    center = float(values.mean())
    worst = float(np.max(np.abs(values / center - 1.0))) if center > 0 else math.inf
    return check(name, worst <= tolerance, worst, f"max |c/c̄ − 1| ≤ {tolerance:g}", str(values.tolist()))


def artifact(name: str, header: list, rows: list) -> Artifact:
    return {"name": name, "header": list(header), "rows": [list(r) for r in rows]}


# ── 模型构造 ──────────────────────────────────────────────────────────────────


def vector_model(kind: str, dim: int, q: Optional[float] = None) -> VectorModel:
    return VectorModel(kind, int(dim), q=q)


def diagonal_model(spec: dict) -> DiagonalModel:
    unknown = set(spec) - {"kind", "params"}
    if unknown or "kind" not in spec:
        raise DomainError(f"a diagonal model is {{kind, params}}, got keys {sorted(spec)}")
    return DiagonalModel(spec["kind"], tuple(spec.get("params", ())))


# ── 节点装饰器 ────────────────────────────────────────────────────────────────


def experiment_node(node_id: str) -> Callable:
    """
    把 body(params, seed, threads) -> dict 包装成 LangGraph 节点函数。

    body 返回 {"checks", "results", "artifacts", "ensembles"}（可缺省）；
    运行中的 warnings.warn 被收集进 state["warnings"]；
    ConvergenceError / RejectionError 转成 state["error"]（退出码 3）；
    WindowError / InsufficientDataError 记为失败的检查（退出码 2）。
    """

    def decorate(body: Callable) -> Callable:
        @functools.wraps(body)
        def node(state: ExperimentState) -> dict:
            progress.start(node_id)
            params, seed, threads = state["params"], state["seed"], state["threads"]
            if DEBUG:
                print(f"[DEBUG] {node_id} params: {params}")
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                try:
                    output = body(params, seed, threads)
                except ConvergenceError as exc:
                    progress.fail(node_id, str(exc))
                    return _error_update("convergence", exc, {"residuals": exc.residuals[-5:]}, caught)
                except RejectionError as exc:
                    progress.fail(node_id, str(exc))
                    return _error_update(
                        "rejection", exc, {"rejected": exc.rejected, "total": exc.total}, caught
                    )
                except AdmissibilityError as exc:
                    progress.fail(node_id, str(exc))
                    return _error_update("rejection", exc, {"measured": exc.measured}, caught)
                except (WindowError, InsufficientDataError) as exc:
                    # 数据不足以测量：记为一条失败的检查（FAIL / 2）
                    progress.fail(node_id, str(exc))
                    failed = check(f"{node_id}_measurement", False, None, "enough points to measure", str(exc))
                    return {**_error_update("", exc, {}, caught), "checks": [failed], "error": None}
            checks = output.get("checks", [])
            progress.done(node_id, f"{sum(c['passed'] for c in checks)}/{len(checks)} 项通过")
            return {
                "checks": checks,
                "results": output.get("results", {}),
                "artifacts": output.get("artifacts", []),
                "ensembles": output.get("ensembles", {}),
                "warnings": _messages(caught),
                "error": None,
            }

        return node

    return decorate


def _messages(caught) -> list[str]:
    seen, messages = set(), []
    for w in caught:
        text = f"{w.category.__name__}: {w.message}"
        if text not in seen:
            seen.add(text)
            messages.append(text)
    return messages


def _error_update(kind: str, exc: Exception, data: dict, caught) -> dict:
    return {
        "checks": [],
        "results": {},
        "artifacts": [],
        "ensembles": {},
        "warnings": _messages(caught),
        "error": {"kind": kind, "message": str(exc), "data": data},
    }
