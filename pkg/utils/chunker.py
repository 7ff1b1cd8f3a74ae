"""
utils/chunker.py
─────────────────
试验分块工具。

大规模蒙特卡洛（N = 10⁵ ~ 10⁶ 次试验，维度上千）直接一次性生成会：
  1. 占用过多内存（N·p 个 float64）
  2. 无法并行，也无法流式计算观测量

分块策略：
  - 按固定的 TRIAL_BLOCK 大小切分试验下标，块号参与种子派生
  - 块大小固定 → 无论线程数多少，生成的数据逐位一致
  - 最后一块可以不满
"""

from typing import NamedTuple

from config import TRIAL_BLOCK
from services.errors import RangeError


class TrialBlock(NamedTuple):
    index: int
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.stop - self.start


def split_into_blocks(n_trials: int, block_size: int = TRIAL_BLOCK) -> list[TrialBlock]:
    """
    将 [0, n_trials) 切分为固定大小的试验块。

    Args:
        n_trials: 试验总数 N（必须 ≥ 1）
        block_size: 每块试验数（默认 TRIAL_BLOCK）

    Returns:
        TrialBlock 列表，按 index 递增排列
    """
    if n_trials < 1:
        raise RangeError(f"N must be >= 1, got {n_trials}")
    if block_size < 1:
        raise RangeError(f"block size must be >= 1, got {block_size}")
    return [
        TrialBlock(i, start, min(start + block_size, n_trials))
        for i, start in enumerate(range(0, n_trials, block_size))
    ]


def get_block_info(n_trials: int, width: int, block_size: int = TRIAL_BLOCK) -> dict:
    """
    预估分块信息（不实际分块，供进度显示和内存决策）

    Returns:
        {"n_trials": int, "blocks": int, "bytes": int, "needs_streaming": bool}
    """
    total_bytes = 8 * n_trials * width
    return {
        "n_trials": n_trials,
        "blocks": max(1, (n_trials + block_size - 1) // block_size),
        "bytes": total_bytes,
        # 超过 256 MiB 时观测量改为逐块流式计算
        "needs_streaming": total_bytes > 256 * 2**20,
    }
