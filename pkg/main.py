"""
main.py
────────
程序入口：命令行 → ExperimentConfig → LangGraph 工作流 → 报告目录

子命令：
  每个实验一个子命令（tail, diameter, product, hanson-wright, xdy, norm-degree,
  resolvent, robust, moments），参数 flag 由 utils/config_file.PARAM_SCHEMAS 生成；
  run CONFIG           运行一个 JSON 配置文件
  reproduce SUITE      依次运行目录里的所有配置，写出 summary.md

用法：
    python main.py tail --dim 256 --n 100000 --seed 7
    python main.py run suite/02b_gaussian_tail.json
    python main.py reproduce suite --out output/suite
    python main.py reproduce suite --verify-determinism
    CONC_LAB_THREADS=4 python main.py resolvent --checks equivalent scaling

退出码：0 全部 PASS；2 有检查 FAIL；3 不收敛 / 拒绝率超限；1 用法或配置错误
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import config
from config import DEBUG, EXIT_USAGE, SUPPORTED_EXPERIMENTS, SUPPORTED_FORMATS
from experiments.common import check
from experiments.judge import decide
from graph import get_workflow
from services.errors import ConcLabError, ConfigError
from state import ExperimentState
from utils.config_file import FLAG_ALIASES, PARAM_SCHEMAS, ExperimentConfig, load_config
from utils.progress import progress
from utils.reporting import render_report, write_report, write_suite_summary


class _Parser(argparse.ArgumentParser):
    """用法错误抛 ConfigError（退出码 1），不直接 sys.exit(2)"""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


# ── 参数解析 ──────────────────────────────────────────────────────────────────


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _scalar_type(value):
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return int
    if isinstance(value, float) or value is None:
        return float
    return str


def _add_param_flags(sub: argparse.ArgumentParser, experiment: str) -> None:
    for key, default in PARAM_SCHEMAS[experiment].items():
        dest = f"p__{key}"
        if isinstance(default, bool):
            sub.add_argument(_flag(key), dest=dest, action=argparse.BooleanOptionalAction)
        elif isinstance(default, list):
            if default and isinstance(default[0], (list, dict)):
                continue  # 嵌套结构只能写在配置文件里
            kind = float if any(isinstance(v, float) for v in default) else _scalar_type(default[0] if default else "")
            sub.add_argument(_flag(key), dest=dest, nargs="+", type=kind)
        elif isinstance(default, dict):
            continue
        else:
            sub.add_argument(_flag(key), dest=dest, type=_scalar_type(default))
    for alias, key in FLAG_ALIASES.get(experiment, {}).items():
        sub.add_argument(_flag(alias), dest=f"p__{key}", nargs="+", type=int)


def _common_flags() -> argparse.ArgumentParser:
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="主种子（u64）")
    common.add_argument("--threads", type=int, help="线程数，0 = CONC_LAB_THREADS / CPU 数")
    common.add_argument("--out", help="输出目录")
    common.add_argument("--format", choices=SUPPORTED_FORMATS, help="附加输出格式")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="conc-lab",
        description="集中不等式实验台 · 多区间集中剖面、蒙特卡洛估计与预解式",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        allow_abbrev=False,
    )
    commands = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()

    for experiment in SUPPORTED_EXPERIMENTS:
        sub = commands.add_parser(
            experiment.replace("_", "-"),
            parents=[common],
            allow_abbrev=False,
            argument_default=argparse.SUPPRESS,
            help=f"运行 {experiment} 实验",
        )
        sub.add_argument("--claim", help="报告中的结论描述")
        sub.add_argument("--verify-determinism", dest="verify_determinism", action=argparse.BooleanOptionalAction)
        _add_param_flags(sub, experiment)

    run = commands.add_parser("run", parents=[common], allow_abbrev=False, argument_default=argparse.SUPPRESS,
                              help="运行一个 JSON 配置文件")
    run.add_argument("config_path", metavar="CONFIG")
    run.add_argument("--verify-determinism", dest="verify_determinism", action=argparse.BooleanOptionalAction)

    reproduce = commands.add_parser("reproduce", allow_abbrev=False, argument_default=argparse.SUPPRESS,
                                    help="运行目录里的全部配置并写出汇总")
    reproduce.add_argument("suite", metavar="SUITE")
    reproduce.add_argument("--out", help="汇总与各配置报告的根目录")
    reproduce.add_argument("--threads", type=int)
    reproduce.add_argument("--verify-determinism", dest="verify_determinism", action="store_true")
    return parser


def _normalize_argv(argv: list) -> list:
    """`run tail ...` 等价于 `tail ...`"""
    names = {e.replace("_", "-") for e in SUPPORTED_EXPERIMENTS}
    if len(argv) >= 2 and argv[0] == "run" and argv[1] in names:
        return argv[1:]
    return argv


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """子命令 flag → ExperimentConfig（flag 只是配置键的语法糖）"""
    experiment = args.command.replace("-", "_")
    options = vars(args)
    params = {key[3:]: value for key, value in options.items() if key.startswith("p__")}
    return ExperimentConfig.from_dict(
        {
            "experiment": experiment,
            "seed": options.get("seed", 0),
            "threads": options.get("threads", 0),
            "out": options.get("out", str(Path("output") / experiment)),
            "format": options.get("format", "json"),
            "claim": options.get("claim", ""),
            "verify_determinism": options.get("verify_determinism", False),
            "params": params,
        }
    )


# ── 运行 ──────────────────────────────────────────────────────────────────────


def build_initial_state(cfg: ExperimentConfig) -> ExperimentState:
    """构建工作流初始状态"""
    return {
        "config": cfg.to_dict(),
        "experiment": cfg.experiment,
        "params": cfg.resolved_params(),
        "seed": cfg.seed,
        "threads": 0,
        "plan": {},
        "checks": [],
        "results": {},
        "artifacts": [],
        "ensembles": {},
        "warnings": [],
        "error": None,
        "verdict": None,
        "exit_code": 0,
    }


def _invoke(cfg: ExperimentConfig) -> ExperimentState:
    return get_workflow().invoke(build_initial_state(cfg))


def run_config(cfg: ExperimentConfig) -> ExperimentState:
    """运行一个配置并写出报告目录，返回最终状态"""
    progress.reset()
    progress.print_banner(cfg.experiment, cfg.seed, cfg.threads or config.THREADS, cfg.out, cfg.claim)
    started = time.time()
    state = dict(_invoke(cfg))

    if cfg.verify_determinism:
        print("\n🔁 确定性校验：同一配置再运行一次...")
        second = _invoke(cfg)
        identical = render_report(state) == render_report(second)
        state["checks"] = list(state["checks"]) + [
            check("report_bytes_identical", identical, identical, "two runs give byte-identical report.json")
        ]
        state["verdict"], state["exit_code"] = decide(state["checks"], state.get("error"))

    metadata = {
        "elapsed_seconds": round(time.time() - started, 3),
        "threads": state.get("threads"),
        "plan": state.get("plan"),
        "verify_determinism": cfg.verify_determinism,
    }
    report_path = write_report(state, cfg.out, cfg.format, metadata)
    progress.print_summary(state["verdict"], state["checks"], str(report_path))
    return state


def reproduce_all(suite_dir, out=None, threads=None, verify_determinism=False) -> int:
    """依次运行 suite 目录中的 *.json，写 summary.md，返回最大退出码（空目录 → 0）"""
    suite_dir = Path(suite_dir)
    if not suite_dir.is_dir():
        raise ConfigError(f"suite directory not found: {suite_dir}", key=str(suite_dir))
    root = Path(out) if out else Path("output") / suite_dir.name
    rows, worst = [], 0
    for path in sorted(suite_dir.glob("*.json")):
        try:
            cfg = load_config(path)
            overrides = {"out": str(root / path.stem) if out else None, "threads": threads}
            if verify_determinism:
                overrides["verify_determinism"] = True
            cfg = cfg.with_overrides(**overrides)
        except ConfigError as exc:
            print(f"❌ {path.name}: {exc}")
            rows.append({"config": path.name, "experiment": "?", "claim": "", "verdict": "CONFIG ERROR",
                         "exit_code": EXIT_USAGE})
            worst = max(worst, EXIT_USAGE)
            continue
        state = run_config(cfg)
        rows.append(
            {
                "config": path.name,
                "experiment": cfg.experiment,
                "claim": cfg.claim,
                "verdict": state["verdict"],
                "exit_code": state["exit_code"],
            }
        )
        worst = max(worst, state["exit_code"])
    summary_path = write_suite_summary(rows, root / "summary.md")
    progress.print_suite_summary(rows, str(summary_path))
    return worst


def main(argv=None) -> int:
    argv = _normalize_argv(list(sys.argv[1:] if argv is None else argv))
    try:
        args = build_parser().parse_args(argv)
        if args.command == "reproduce":
            return reproduce_all(
                args.suite,
                getattr(args, "out", None),
                getattr(args, "threads", None),
                getattr(args, "verify_determinism", False),
            )
        if args.command == "run":
            cfg = load_config(args.config_path).with_overrides(
                seed=getattr(args, "seed", None),
                threads=getattr(args, "threads", None),
                out=getattr(args, "out", None),
                format=getattr(args, "format", None),
                verify_determinism=getattr(args, "verify_determinism", None),
            )
        else:
            cfg = config_from_args(args)
        return run_config(cfg)["exit_code"]
    except ConfigError as exc:
        print(f"❌ 配置错误: {exc}")
        return EXIT_USAGE
    except ConcLabError as exc:
        print(f"❌ 参数错误: {type(exc).__name__}: {exc}")
        if DEBUG:
            import traceback

            traceback.print_exc()
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("\n⚠️  用户中断")
        return EXIT_USAGE
    except Exception as e:
        print(f"\n❌ 工作流执行出错: {type(e).__name__}: {e}")
        if DEBUG:
            import traceback

            traceback.print_exc()
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
