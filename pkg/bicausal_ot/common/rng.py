"""可拆分、基于计数器的随机流。

所有需要随机性的操作都通过 `(master_seed, *key)` 派生独立流：
底层是 `SeedSequence(spawn_key=key)` + Philox（计数器型生成器），
因此并行 worker 拿到的流互不重叠，且与调度顺序无关。
"""

import numpy as np

# 流命名空间，避免不同用途的 key 碰撞。
STREAM_REPETITION = 0
STREAM_TREE_X = 1
STREAM_TREE_Y = 2
STREAM_FVI_STATES = 3
STREAM_FVI_TARGETS = 4
STREAM_FVI_SHUFFLE = 5
STREAM_FVI_INIT = 6


def make_rng(seed: int | np.random.SeedSequence, *key: int) -> np.random.Generator:
    """按 (seed, *key) 构造独立的 Philox 生成器。

    Args:
        seed: 主种子，或已有的 SeedSequence（其 spawn_key 会作为前缀）。
        key: 非负整数路径，例如 (STREAM_TREE_X, depth, index)。

    Returns:
        确定性的 numpy Generator。
    """
    if isinstance(seed, np.random.SeedSequence):
        seq = np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key)
        )
    else:
        seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(seq))


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    """返回 (seed, *key) 对应的 SeedSequence，可继续传给 `make_rng` 细分。"""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(key))


def repetition_seed(master_seed: int, rep_index: int) -> np.random.SeedSequence:
    """第 rep_index 次重复实验的种子：固定拆分 (master, rep)。"""
    return seed_sequence(master_seed, STREAM_REPETITION, rep_index)
