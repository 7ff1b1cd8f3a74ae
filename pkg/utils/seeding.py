"""
utils/seeding.py
─────────────────
计数器式种子派生。

每个随机流由 (master_seed, stream, block, column, ...) 唯一确定，
通过 numpy.random.SeedSequence 的 spawn_key 派生，因此：
  - 不同分块可以在任意线程、任意顺序生成，结果与顺序生成完全一致
  - 同一 master_seed 下不同 stream / column 的数据互相独立
"""

import numpy as np

from services.errors import RangeError

MAX_SEED = 2**64 - 1


def validate_seed(master_seed: int) -> int:
    """主种子必须是 64 位无符号整数"""
    seed = int(master_seed)
    if not 0 <= seed <= MAX_SEED:
        raise RangeError(f"master seed must be a u64, got {master_seed}")
    return seed


def derive_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=validate_seed(master_seed), spawn_key=tuple(int(k) for k in key)
    )


def derive_generator(master_seed: int, *key: int) -> np.random.Generator:
    """
    派生一个独立的 Generator。

    Args:
        master_seed: 实验主种子
        key: (stream, block, column, ...) 计数器坐标

    Returns:
        np.random.Generator（PCG64）
    """
    return np.random.default_rng(derive_sequence(master_seed, *key))
