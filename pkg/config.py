"""
config.py
──────────
全局配置：集中字段从环境变量（.env）读取，带默认值。

分组：
  - 集中不等式常数（C, c）
  - 经验尾估计（网格点数、拟合窗口、DKW 置信度、指数容差）
  - 剖面裁剪网格
  - 不动点 / 预解式数值容差
  - 采样与并行（分块大小、线程数）
  - 各种 SUPPORTED_* 目录（实验种类、向量族、范数种类……）
"""

import math
import os

from dotenv import load_dotenv

load_dotenv(override=True)


def _float_env(name: str, default: float) -> float:
    return float(os.getenv(name, str(default)))


def _int_env(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


# ── 集中不等式常数 ────────────────────────────────────────────────────────────
# 高斯向量的经典取值 C=2, c=√2；每个剖面都可以单独覆盖
DEFAULT_C = _float_env("CONC_LAB_C", 2.0)
DEFAULT_SMALL_C = _float_env("CONC_LAB_SMALL_C", math.sqrt(2.0))

# ── 经验尾估计 ────────────────────────────────────────────────────────────────
TAIL_GRID_POINTS = _int_env("TAIL_GRID_POINTS", 256)
FIT_WINDOW = (
    _float_env("FIT_WINDOW_LO", 1e-3),
    _float_env("FIT_WINDOW_HI", 1e-1),
)
DKW_CONFIDENCE = _float_env("DKW_CONFIDENCE", 0.05)
# N = 10⁵ 时的指数接受容差（绝对值）
EXPONENT_TOLERANCE = _float_env("EXPONENT_TOLERANCE", 0.3)
MIN_FIT_POINTS = 5
CHECK_MOMENTS = (1.0, 2.0, 4.0, 6.0)

# ── 剖面裁剪 ──────────────────────────────────────────────────────────────────
PRUNE_GRID_POINTS = _int_env("PRUNE_GRID_POINTS", 1024)

# ── 不动点 / 预解式 ───────────────────────────────────────────────────────────
FIXED_POINT_TOL = _float_env("FIXED_POINT_TOL", 1e-10)
FIXED_POINT_MAX_ITER = _int_env("FIXED_POINT_MAX_ITER", 500)
RESOLVENT_RESIDUAL_TOL = _float_env("RESOLVENT_RESIDUAL_TOL", 1e-8)
SCHUR_TOL = _float_env("SCHUR_TOL", 1e-8)
PIVOT_EPS = 1e-10
MAX_REJECTION_RATE = _float_env("MAX_REJECTION_RATE", 0.01)
EXPECTATION_SAMPLES = _int_env("EXPECTATION_SAMPLES", 10_000)

# ── 采样与并行 ────────────────────────────────────────────────────────────────
# 分块大小决定种子流的划分，改动它会改变生成的数据（但不影响统计性质）
TRIAL_BLOCK = _int_env("TRIAL_BLOCK", 4096)
THREADS = _int_env("CONC_LAB_THREADS", 0) or (os.cpu_count() or 1)
SEED_DERIVATION = "seedseq-v1"

# ── 调试模式 ──────────────────────────────────────────────────────────────────
DEBUG = os.getenv("DEBUG", "false").lower() == "true"

# ── 支持的目录 ────────────────────────────────────────────────────────────────
SUPPORTED_EXPERIMENTS = [
    "tail",
    "diameter",
    "product",
    "hanson_wright",
    "xdy",
    "norm_degree",
    "resolvent",
    "robust",
    "moments",
]

SUPPORTED_VECTOR_KINDS = [
    "gaussian",
    "sphere",
    "ball",
    "cube",
    "laplace",
    "lq_ball",
    "replicated",
    "concat",
]

SUPPORTED_NORM_KINDS = {
    "linf": "ℓ∞ 范数（ℝ^p）",
    "euclidean": "欧氏范数（ℝ^p）",
    "spectral": "谱范数（M_{p,n}）",
    "frobenius": "Frobenius 范数（M_{p,n}）",
    "nuclear": "核范数（M_{p,n}）",
    "diag": "对角半范数 ‖·‖_d（M_n）",
}

SUPPORTED_DIAGONAL_MODELS = ["deterministic", "two_point", "uniform", "gaussian", "clip"]

SUPPORTED_FORMATS = ["json", "csv", "md"]

# ── 退出码 ────────────────────────────────────────────────────────────────────
EXIT_PASS = 0
EXIT_USAGE = 1
EXIT_FAIL = 2
EXIT_CONVERGENCE = 3
