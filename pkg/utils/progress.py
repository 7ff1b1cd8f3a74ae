"""
utils/progress.py
──────────────────
进度可视化工具（基于 rich 库）。

提供：
  1. WorkflowProgress 类：跟踪各节点（prepare / 实验 / judge）的运行状态
  2. 每个节点开始/完成/失败的美观打印
  3. 单次实验的检查表与 reproduce 的汇总表

依赖 rich 库（pip install rich），若未安装则降级为普通 print。
"""

import time
from typing import Optional

# 尝试导入 rich，不可用则降级
try:
    from rich.console import Console
    from rich.table import Table
    from rich.panel import Panel
    from rich import box

    RICH_AVAILABLE = True
    console = Console()
except ImportError:
    RICH_AVAILABLE = False
    console = None


# 节点的元信息（展示用）
NODE_META = {
    "prepare": ("🧭", "准备", "解析参数、线程与分块"),
    "tail": ("📉", "尾部拟合", "经验集中函数与指数拟合"),
    "diameter": ("📏", "可观测直径", "线性/范数观测的离散度"),
    "product": ("✖️ ", "乘积剖面", "乘积尾指数与剖面代数"),
    "hanson_wright": ("🔷", "Hanson-Wright", "双线性型方差与远尾"),
    "xdy": ("🧮", "XDYᵀ 泛函", "XDYᵀu 尺度、迹配对与均值"),
    "norm_degree": ("📐", "范数度", "E‖Z − Ẑ‖ 与 η^{1/2}"),
    "resolvent": ("🔁", "预解式", "δ 不动点、确定性等价与留一"),
    "robust": ("🛡️ ", "稳健回归", "β 不动点与留一耦合"),
    "moments": ("📊", "矩刻画", "中心矩与 moment_bound"),
    "judge": ("⚖️ ", "判定", "汇总检查给出 PASS/FAIL"),
}


class WorkflowProgress:
    """工作流进度追踪器（单例使用）"""

    def __init__(self):
        self.reset()

    def reset(self):
        self._start_time = time.time()
        self._node_status: dict[str, str] = {}  # node_id → status
        self._node_result: dict[str, str] = {}  # node_id → 结果摘要
        self._node_times: dict[str, float] = {}  # node_id → 用时(秒)
        self._node_start: dict[str, float] = {}  # node_id → 开始时间

    @property
    def elapsed(self) -> float:
        return time.time() - self._start_time

    def start(self, node_id: str):
        """标记某个节点开始运行"""
        self._node_status[node_id] = "running"
        self._node_start[node_id] = time.time()
        emoji, name, desc = NODE_META.get(node_id, ("🔬", node_id, ""))

        if RICH_AVAILABLE:
            console.rule(f"[bold cyan]{emoji}  {name}[/bold cyan]  [dim]{desc}[/dim]")
        else:
            print(f"\n{'─' * 50}")
            print(f"{emoji} [{name}] 开始运行...")

    def done(self, node_id: str, result_summary: str = ""):
        """标记某个节点完成"""
        elapsed = time.time() - self._node_start.get(node_id, time.time())
        self._node_status[node_id] = "done"
        self._node_result[node_id] = result_summary
        self._node_times[node_id] = elapsed
        emoji, name, _ = NODE_META.get(node_id, ("🔬", node_id, ""))

        if RICH_AVAILABLE:
            console.print(
                f"  [green]✅ {emoji} {name} 完成[/green]  "
                f"[dim]{result_summary}  ({elapsed:.1f}s)[/dim]"
            )
        else:
            print(f"  ✅ {emoji} [{name}] 完成  {result_summary}  ({elapsed:.1f}s)")

    def fail(self, node_id: str, reason: str = ""):
        """标记某个节点因不收敛/拒绝率超限而中止"""
        elapsed = time.time() - self._node_start.get(node_id, time.time())
        self._node_status[node_id] = "failed"
        self._node_result[node_id] = reason
        self._node_times[node_id] = elapsed
        emoji, name, _ = NODE_META.get(node_id, ("🔬", node_id, ""))

        if RICH_AVAILABLE:
            console.print(f"  [red]❌ {emoji} {name} 中止[/red]  [dim]{reason}[/dim]")
        else:
            print(f"  ❌ [{name}] 中止  {reason}")

    def print_banner(self, experiment: str, seed: int, threads: int, out_dir: str, claim: str = ""):
        """打印实验启动横幅"""
        emoji, name, desc = NODE_META.get(experiment, ("🔬", experiment, ""))
        if RICH_AVAILABLE:
            content = (
                f"[bold]实验[/bold]：{emoji} {name}（{experiment}）  [dim]{desc}[/dim]\n"
                f"[bold]主种子[/bold]：{seed}\n"
                f"[bold]线程数[/bold]：{threads}\n"
                f"[bold]输出目录[/bold]：{out_dir}"
                + (f"\n[bold]结论[/bold]：{claim}" if claim else "")
            )
            console.print(
                Panel(
                    content,
                    title="[bold magenta]📈 conc-lab · 集中现象实验[/bold magenta]",
                    border_style="magenta",
                    expand=False,
                )
            )
        else:
            print("╔══════════════════════════════════════════════╗")
            print("║        📈 conc-lab · 集中现象实验            ║")
            print("╚══════════════════════════════════════════════╝")
            print(f"  实验：{name}（{experiment}）")
            print(f"  主种子：{seed}")
            print(f"  线程数：{threads}")
            print(f"  输出目录：{out_dir}")
            if claim:
                print(f"  结论：{claim}")

    def print_summary(self, verdict: str, checks: list, output_path: Optional[str] = None):
        """打印单次实验的检查表"""
        total_time = self.elapsed

        if RICH_AVAILABLE:
            table = Table(
                title="📊 检查结果",
                box=box.ROUNDED,
                show_header=True,
                header_style="bold cyan",
            )
            table.add_column("检查", style="bold")
            table.add_column("实测", justify="right")
            table.add_column("判据", style="dim")
            table.add_column("结果", justify="center")

            for check in checks:
                measured = check["measured"]
                shown = f"{measured:.4g}" if isinstance(measured, float) else str(measured)
                table.add_row(
                    check["name"],
                    shown[:40] + "..." if len(shown) > 40 else shown,
                    check["expected"],
                    "[green]✅ PASS[/green]" if check["passed"] else "[red]❌ FAIL[/red]",
                )

            console.print(table)
            color = {"PASS": "green", "FAIL": "red"}.get(verdict, "yellow")
            console.print(
                f"\n[bold {color}]{verdict}[/bold {color}]  "
                f"{sum(c['passed'] for c in checks)}/{len(checks)} 项通过 | "
                f"总用时 {total_time:.1f}s"
            )
            if output_path:
                console.print(f"[dim]📄 报告已保存：{output_path}[/dim]")
        else:
            print(f"\n{'=' * 50}")
            for check in checks:
                mark = "✅" if check["passed"] else "❌"
                print(f"  {mark} {check['name']}: {check['measured']}  ({check['expected']})")
            print(f"{verdict}  总用时：{total_time:.1f}s")
            if output_path:
                print(f"📄 报告已保存：{output_path}")

    def print_suite_summary(self, rows: list[dict], summary_path: Optional[str] = None):
        """打印 reproduce 的汇总表"""
        if RICH_AVAILABLE:
            table = Table(
                title="🧪 复现汇总",
                box=box.ROUNDED,
                show_header=True,
                header_style="bold cyan",
            )
            table.add_column("配置", style="bold")
            table.add_column("实验")
            table.add_column("结论", style="dim")
            table.add_column("结果", justify="center")
            for row in rows:
                color = {"PASS": "green", "FAIL": "red"}.get(row["verdict"], "yellow")
                claim = row["claim"]
                table.add_row(
                    row["config"],
                    row["experiment"],
                    claim[:50] + "..." if len(claim) > 50 else claim,
                    f"[{color}]{row['verdict']}[/{color}]",
                )
            console.print(table)
            if summary_path:
                console.print(f"[dim]📄 汇总已保存：{summary_path}[/dim]")
        else:
            print(f"\n{'=' * 50}")
            for row in rows:
                print(f"  {row['verdict']:5}  {row['config']}  ({row['experiment']})")
            if summary_path:
                print(f"📄 汇总已保存：{summary_path}")


# 全局进度实例（在实验节点函数里直接使用）
progress = WorkflowProgress()
