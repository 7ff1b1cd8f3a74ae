"""
utils/reporting.py
───────────────────
实验报告的序列化与落盘。

输出文件（均位于 config.out 目录）：
  - report.json    只依赖 (config, seed) 的确定性内容，sort_keys，可逐字节比对
  - metadata.json  时间戳、用时、线程数、平台等，不参与确定性比对
  - <artifact>.csv RFC 4180，表头必备，'.' 作小数点
  - <ensemble>.bin 实验保存的样本（见 utils/container.py）
  - report.md      --format md 时输出
  - checks.csv     --format csv 时输出
"""

import csv
import json
import math
import platform
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

import numpy as np

from utils.container import CSV_MAX_CELLS, export_csv, save_ensemble

REPORT_KEYS = ("config", "experiment", "verdict", "exit_code", "checks", "results", "warnings", "error")


def to_jsonable(value: Any) -> Any:
    """numpy 标量/数组、元组、非有限浮点数 → 可 JSON 序列化的结构"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return value


def build_report(state: dict) -> dict:
    return to_jsonable({key: state.get(key) for key in REPORT_KEYS})


def render_report(state: dict) -> str:
    return json.dumps(build_report(state), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_csv(path: Path, header: list, rows: list) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in to_jsonable(row)])
    return path


def render_markdown(state: dict) -> str:
    config = state.get("config", {})
    lines = [
        f"# {state.get('experiment')} · {state.get('verdict')}",
        "",
        f"- seed: `{config.get('seed')}`",
        f"- exit code: `{state.get('exit_code')}`",
    ]
    if config.get("claim"):
        lines.append(f"- claim: {config['claim']}")
    lines += ["", "| check | measured | expected | result |", "|---|---|---|---|"]
    for check in state.get("checks", []):
        measured = to_jsonable(check["measured"])
        if isinstance(measured, float):
            measured = f"{measured:.6g}"
        mark = "✅ PASS" if check["passed"] else "❌ FAIL"
        lines.append(f"| {check['name']} | {measured} | {check['expected']} | {mark} |")
    if state.get("error"):
        error = state["error"]
        lines += ["", f"**{error['kind']}**: {error['message']}"]
    if state.get("warnings"):
        lines += ["", "## Warnings", ""] + [f"- {w}" for w in state["warnings"]]
    return "\n".join(lines) + "\n"


def write_report(
    state: dict, out_dir, fmt: str = "json", metadata: Optional[dict] = None
) -> Path:
    """写出报告目录，返回 report.json 的路径"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report_path = out_dir / "report.json"
    report_path.write_text(render_report(state), encoding="utf-8")

    meta = {
        "written_at": datetime.now().isoformat(timespec="seconds"),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
    }
    meta.update(metadata or {})
    (out_dir / "metadata.json").write_text(
        json.dumps(to_jsonable(meta), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )

    for artifact in state.get("artifacts", []):
        write_csv(out_dir / f"{artifact['name']}.csv", artifact["header"], artifact["rows"])

    for name, ensemble in (state.get("ensembles") or {}).items():
        save_ensemble(ensemble, out_dir / f"{name}.bin")
        if fmt == "csv" and ensemble.N * ensemble.width <= CSV_MAX_CELLS:
            export_csv(ensemble, out_dir / f"{name}_values.csv")

    if fmt == "csv":
        write_csv(
            out_dir / "checks.csv",
            ["name", "passed", "measured", "expected", "detail"],
            [
                [c["name"], c["passed"], json.dumps(to_jsonable(c["measured"])), c["expected"], c["detail"]]
                for c in state.get("checks", [])
            ],
        )
    if fmt == "md":
        (out_dir / "report.md").write_text(render_markdown(state), encoding="utf-8")
    return report_path


def write_suite_summary(rows: list[dict], path) -> Path:
    """reproduce 的 Markdown 汇总表：每个配置一行"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "# Reproduction summary",
        "",
        "| config | experiment | claim | verdict | exit |",
        "|---|---|---|---|---|",
    ]
    for row in rows:
        lines.append(
            f"| {row['config']} | {row['experiment']} | {row['claim']} | {row['verdict']} | {row['exit_code']} |"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
