"""
utils/config_file.py
─────────────────────
实验配置文件（JSON）的严格 schema。

结构：
  {
    "experiment": "tail",
    "seed": 7,
    "threads": 0,              # 0 = 使用 config.THREADS
    "out": "output/tail",
    "format": "json",
    "claim": "……",             # 人类可读的结论描述，出现在 reproduce 汇总表
    "verify_determinism": false,
    "params": {...}            # 各实验自己的参数，键必须出现在 PARAM_SCHEMAS 中
  }

规则：
  - 任何未知键都是致命错误（ConfigError 携带键名，退出码 1）
  - 参数类型由默认值推断；默认值为 None 的键接受数值或 null
  - 命令行参数只是配置键的语法糖：flags → ExperimentConfig → to_dict → from_dict 不变
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import config
from services.errors import ConfigError

# ── 各实验的参数 schema（默认值即类型）────────────────────────────────────────

PARAM_SCHEMAS: dict[str, dict[str, Any]] = {
    "tail": {
        "model": "gaussian",
        "q": None,
        "dims": [256],
        "n": 100_000,
        "direction": "random",
        "expect_q": None,
        "tolerance": config.EXPONENT_TOLERANCE,
        "window": list(config.FIT_WINDOW),
        "center": "median",
        "envelope": True,
        "C": 2.0,
        "c": math.sqrt(2.0),
        "save_ensemble": False,
    },
    "diameter": {
        "target": "vector",
        "model": "gaussian",
        "q": None,
        "dims": [64, 256, 1024],
        "n": 100_000,
        "K": 16,
        "include_norm": True,
        "include_normalized_sum": False,
        "lo": 0.9,
        "hi": 1.1,
        "max_ratio": None,
        "min_sum_std_ratio": None,
    },
    "product": {
        "mode": "tail",
        "m_values": [2, 3],
        "n": 1_000_000,
        "ranges": [[0.8, 1.2], [0.5, 0.9]],
        "window": [1e-4, 1e-2],
        "envelope": True,
        "oracle": True,
        "C": 2.0,
        "c": math.sqrt(2.0),
        "entrywise_p": 64,
        "nu_trials": 10_000,
        "max_m": 8,
        "dominance_trials": 1000,
        "slack": 1e-12,
    },
    "hanson_wright": {
        "p": 500,
        "n": 100_000,
        "matrices": 20,
        "var_range": [0.95, 1.05],
        "far_tail_dim": 2,
        "far_n": 100_000,
        "far_range": [0.8, 1.2],
        "window": list(config.FIT_WINDOW),
        "C": 4.0,
        "c": 4.0,
    },
    "xdy": {
        "ns": [64, 128, 256],
        "p_ratio": 1.0,
        "trials": 300,
        "K": 8,
        "d_model": {"kind": "two_point", "params": [-1.0, 1.0]},
        "coupling": "independent",
        "tolerance": 0.5,
        "mean_p": 8,
        "mean_trials": 2000,
        "mean_factor": 3.0,
    },
    "norm_degree": {
        "kinds": ["euclidean", "linf", "spectral", "frobenius", "diag"],
        "dims": {
            "euclidean": [64, 256, 1024],
            "linf": [256, 1024, 4096],
            "spectral": [50, 100, 200],
            "frobenius": [16, 32, 64],
            "diag": [16, 64, 256],
        },
        "trials": 2000,
        "matrix_trials": 200,
        "max_ratio": 2.0,
        "gamma_p": 256,
        "gamma_tol": 0.01,
        "spectral_range": [0.9, 1.05],
    },
    "resolvent": {
        "checks": ["equivalent"],
        "isotropic": True,
        "d_law": "two_point",
        "p": 100,
        "n": 400,
        "d": 0.3,
        "trials": 200,
        "kappa": 1.65,
        "kappa_D": 0.3,
        "epsilon": 0.15,
        "rel_tol": 0.1,
        "oracle_tol": 1e-8,
        "scaling_ns": [100, 200, 400],
        "scaling_trials": 100,
        "scaling_factor": 3.0,
        "schur_draws": 1000,
        "schur_p": 20,
        "schur_n": 40,
        "schur_kappa": 2.0,
        "schur_kappa_D": 0.2,
        "schur_epsilon": 0.2,
        "qu_trials": 100,
        "qu_K": 8,
    },
    "robust": {
        "ns": [200, 400, 800],
        "p_ratio": 0.125,
        "link": "tanh",
        "amplitude": 0.2,
        "shift": 0.5,
        "epsilon": 0.1,
        "max_ratio": 2.0,
    },
    "moments": {
        "kinds": ["gaussian", "laplace", "product2"],
        "n": 100_000,
        "dim": 64,
        "orders": [2.0, 4.0, 6.0],
        "C": 4.0,
        "c": 4.0,
    },
}

# 命令行别名：--dim 256 等价于 dims=[256]
FLAG_ALIASES: dict[str, dict[str, str]] = {
    "tail": {"dim": "dims"},
    "diameter": {"dim": "dims"},
}

# 有默认值、但可以显式写 null 关闭对应检查的参数
NULLABLE_PARAMS: dict[str, tuple] = {
    "diameter": ("lo", "hi"),
}

TOP_LEVEL_KEYS = ("experiment", "seed", "threads", "out", "format", "claim", "verify_determinism", "params")


# ── 类型校验 ──────────────────────────────────────────────────────────────────


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_type(key: str, value, default) -> Any:
    """按默认值的类型校验 value，返回规范化后的值（int → float 等）"""
    if default is None:
        if value is None or _is_number(value):
            return value
        raise ConfigError(f"{key} must be a number or null, got {value!r}", key=key)
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif isinstance(default, float):
        if _is_number(value):
            return float(value)
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
    elif isinstance(default, list):
        if isinstance(value, list):
            return value
    elif isinstance(default, dict):
        if isinstance(value, dict):
            return value
    raise ConfigError(
        f"{key} expects {type(default).__name__}, got {type(value).__name__} ({value!r})", key=key
    )


def validate_params(experiment: str, params: dict) -> dict:
    schema = PARAM_SCHEMAS[experiment]
    nullable = NULLABLE_PARAMS.get(experiment, ())
    checked = {}
    for key, value in params.items():
        if key not in schema:
            raise ConfigError(f"unknown parameter {key!r} for experiment {experiment!r}", key=f"params.{key}")
        if value is None and key in nullable:
            checked[key] = None
            continue
        checked[key] = _check_type(f"params.{key}", value, schema[key])
    return checked


# ── ExperimentConfig ──────────────────────────────────────────────────────────


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    threads: int = 0
    out: str = "output"
    format: str = "json"
    claim: str = ""
    verify_determinism: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in config.SUPPORTED_EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; expected one of {config.SUPPORTED_EXPERIMENTS}",
                key="experiment",
            )
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a u64, got {self.seed!r}", key="seed")
        if isinstance(self.threads, bool) or not isinstance(self.threads, int) or self.threads < 0:
            raise ConfigError(f"threads must be an integer >= 0, got {self.threads!r}", key="threads")
        if self.format not in config.SUPPORTED_FORMATS:
            raise ConfigError(
                f"format must be one of {config.SUPPORTED_FORMATS}, got {self.format!r}", key="format"
            )
        self.params = validate_params(self.experiment, dict(self.params))

    def resolved_params(self) -> dict:
        """默认值 + 显式参数"""
        merged = json.loads(json.dumps(PARAM_SCHEMAS[self.experiment]))
        merged.update(self.params)
        return merged

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "threads": self.threads,
            "out": self.out,
            "format": self.format,
            "claim": self.claim,
            "verify_determinism": self.verify_determinism,
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("a config must be a JSON object")
        for key in data:
            if key not in TOP_LEVEL_KEYS:
                raise ConfigError(f"unknown config key {key!r}", key=key)
        if "experiment" not in data:
            raise ConfigError("missing required key 'experiment'", key="experiment")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("params must be an object", key="params")
        for key in ("out", "claim"):
            if key in data and not isinstance(data[key], str):
                raise ConfigError(f"{key} must be a string", key=key)
        if "verify_determinism" in data and not isinstance(data["verify_determinism"], bool):
            raise ConfigError("verify_determinism must be true or false", key="verify_determinism")
        return cls(
            experiment=data["experiment"],
            seed=data.get("seed", 0),
            threads=data.get("threads", 0),
            out=data.get("out", "output"),
            format=data.get("format", "json"),
            claim=data.get("claim", ""),
            verify_determinism=data.get("verify_determinism", False),
            params=params,
        )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}", key=str(path))
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
