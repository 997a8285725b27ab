"""由 ProcessModel 构造不重组二叉（或 b 叉）情景树。

每个节点用自己的随机子流（按 (深度, 层内序号) 派生）抽 S 个条件后继，
再按划分规则把样本分成 b 组，用组均值作为子节点状态、组频率作为条件概率。
子流只依赖节点坐标，所以同一种子下 T 期的树恰是 T+1 期树的前缀。

文本格式（仅用于调试，`dumps_tree` / `loads_tree`）::

    # scenario-tree horizon=<T> branching=<b> dimension=<d>
    <index> <depth> <parent|-> <state,逗号分隔> <child:prob|child:prob|...|->

节点按层序编号，根为 0；浮点数用 repr 输出，可无损读回。
"""

from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Literal

import numpy as np

from ..common.log import logger
from ..common.rng import make_rng
from ..common.storage import atomic_write_text
from .process import Path, ProcessModel

PartitionRule = Literal["mean", "median", "moment", "quantile"]
PARTITION_RULES: tuple[str, ...] = ("mean", "median", "moment", "quantile")
DEFAULT_SAMPLES_PER_NODE = 1000
PROB_TOL = 1e-12


class TreeError(ValueError):
    """情景树构造或结构校验失败。"""


@dataclass(frozen=True)
class TreeNode:
    """文本导出用的单节点视图。"""

    index: int
    depth: int
    parent: int | None
    state: tuple[float, ...]
    children: tuple[tuple[int, float], ...]


def level_offset(depth: int, branching: int) -> int:
    """深度 depth 第一个节点的全局层序编号。"""
    if branching == 1:
        return depth
    return (branching**depth - 1) // (branching - 1)


@dataclass(frozen=True, eq=False)
class ScenarioTree:
    """按层存储的不重组情景树。

    - `states[t]`：深度 t 的节点状态，形状 (b^t, d)
    - `child_probs[t]`：深度 t 各节点的子节点条件概率，形状 (b^t, b)，t = 0..T-1

    深度 t 的第 k 个节点，其第 j 个子节点是深度 t+1 的第 k*b + j 个节点。
    """

    horizon: int
    branching: int
    states: tuple[np.ndarray, ...]
    child_probs: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        T, b = int(self.horizon), int(self.branching)
        if T < 1 or b < 1:
            raise TreeError(f"树的期数与分叉数必须为正: T={T}, b={b}")
        if len(self.states) != T + 1 or len(self.child_probs) != T:
            raise TreeError("树的层数与期数不一致")
        states, probs = [], []
        for t in range(T + 1):
            level = np.array(self.states[t], dtype=float, copy=True)
            if level.ndim == 1:
                level = level[:, None]
            if level.shape[0] != b**t:
                raise TreeError(f"深度 {t} 应有 {b**t} 个节点，实际 {level.shape[0]}")
            if not np.all(np.isfinite(level)):
                raise TreeError(f"深度 {t} 的节点状态包含非有限值")
            level.setflags(write=False)
            states.append(level)
        for t in range(T):
            level_probs = np.array(self.child_probs[t], dtype=float, copy=True)
            if level_probs.shape != (b**t, b):
                raise TreeError(f"深度 {t} 的子概率形状应为 {(b**t, b)}")
            if np.any(level_probs <= 0):
                raise TreeError(f"深度 {t} 存在非正的子概率")
            if np.max(np.abs(level_probs.sum(axis=1) - 1.0)) > PROB_TOL:
                raise TreeError(f"深度 {t} 的子概率之和不为 1")
            level_probs.setflags(write=False)
            probs.append(level_probs)
        if states[0].shape[0] != 1:
            raise TreeError("根层必须只有一个节点")
        object.__setattr__(self, "horizon", T)
        object.__setattr__(self, "branching", b)
        object.__setattr__(self, "states", tuple(states))
        object.__setattr__(self, "child_probs", tuple(probs))

    @property
    def dimension(self) -> int:
        return self.states[0].shape[1]

    @property
    def root_state(self) -> np.ndarray:
        return self.states[0][0]

    def node_count(self, depth: int | None = None) -> int:
        """某一深度（缺省为全树）的节点数。"""
        if depth is not None:
            return self.branching**depth
        return sum(self.branching**t for t in range(self.horizon + 1))

    def path_probabilities(self, depth: int | None = None) -> np.ndarray:
        """从根到深度 depth（缺省为叶层）各节点的路径概率。"""
        depth = self.horizon if depth is None else depth
        probs = np.ones(1)
        for t in range(depth):
            probs = (probs[:, None] * self.child_probs[t]).reshape(-1)
        return probs

    def leaf_paths(self) -> np.ndarray:
        """所有根到叶路径，形状 (b^T, T+1, d)，顺序与叶层节点一致。"""
        T, b = self.horizon, self.branching
        leaves = np.arange(b**T)
        paths = np.empty((b**T, T + 1, self.dimension))
        for t in range(T + 1):
            paths[:, t, :] = self.states[t][leaves // b ** (T - t)]
        return paths

    def nodes(self) -> list[TreeNode]:
        """按层序展开全部节点。"""
        T, b = self.horizon, self.branching
        result: list[TreeNode] = []
        for t in range(T + 1):
            offset = level_offset(t, b)
            for k in range(b**t):
                parent = None if t == 0 else level_offset(t - 1, b) + k // b
                children: tuple[tuple[int, float], ...] = ()
                if t < T:
                    child_offset = level_offset(t + 1, b)
                    children = tuple(
                        (child_offset + k * b + j, float(self.child_probs[t][k, j]))
                        for j in range(b)
                    )
                result.append(
                    TreeNode(
                        index=offset + k,
                        depth=t,
                        parent=parent,
                        state=tuple(float(v) for v in self.states[t][k]),
                        children=children,
                    )
                )
        return result


def _history(levels: list[np.ndarray], depth: int, index: int, branching: int) -> np.ndarray:
    """深度 depth 第 index 个节点的祖先状态序列 x_{0:depth}。"""
    return np.stack(
        [levels[s][index // branching ** (depth - s)] for s in range(depth + 1)]
    )


def _split_cells(
    draws: np.ndarray, branching: int, partition: str
) -> tuple[np.ndarray, np.ndarray]:
    """把一维样本划分为 branching 组，返回 (子节点状态, 子节点概率)。"""
    count = draws.shape[0]
    if partition == "mean":
        threshold = draws.mean()
        low = draws[draws <= threshold]
        high = draws[draws > threshold]
        if low.size == 0 or high.size == 0:
            common = draws.mean()
            logger.debug(f"[Tree] 划分出现空组（样本全部相同），两个子节点取公共值 {common:.6g}")
            return np.array([common, common]), np.array([0.5, 0.5])
        return (
            np.array([low.mean(), high.mean()]),
            np.array([low.size / count, high.size / count]),
        )
    if partition == "moment":
        center, spread = draws.mean(), draws.std()
        return np.array([center - spread, center + spread]), np.array([0.5, 0.5])

    # median 与 quantile：按排序后等频切分。
    chunks = np.array_split(np.sort(draws), branching)
    return (
        np.array([chunk.mean() for chunk in chunks]),
        np.array([chunk.size / count for chunk in chunks]),
    )


def build_tree(
    model: ProcessModel,
    T: int,
    samples_per_node: int,
    rng: np.random.Generator,
    branching: int = 2,
    partition: PartitionRule = "mean",
) -> ScenarioTree:
    """用条件抽样构造 T 期不重组情景树。

    Args:
        model: 一维过程模型。
        T: 树的期数。
        samples_per_node: 每个节点抽取的条件后继数 S（≥ 2 且 ≥ branching）。
        rng: 随机源；只从中取一个根种子，节点子流再按坐标派生。
        branching: 每个非叶节点的子节点数，默认 2。
        partition: 划分规则；`mean`（默认，阈值为样本均值）、`median`、
            `moment`（均值 ± 标准差，各 1/2）只支持二叉，`quantile` 支持任意分叉。

    Raises:
        TreeError: 参数越界或 d > 1。
    """
    T = int(T)
    S = int(samples_per_node)
    if model.dimension != 1:
        raise TreeError(f"tree methods require d=1（当前 d={model.dimension}）")
    if T < 1:
        raise TreeError(f"树的期数必须为正，实际为 {T}")
    if branching < 2:
        raise TreeError(f"分叉数必须 ≥ 2，实际为 {branching}")
    if S < 2 or S < branching:
        raise TreeError(f"每节点样本数 S={S} 必须 ≥ 2 且 ≥ 分叉数 {branching}")
    if partition not in PARTITION_RULES:
        raise TreeError(f"未知的划分规则: {partition!r}")
    if branching != 2 and partition != "quantile":
        raise TreeError(f"划分规则 {partition!r} 只支持二叉树，多叉请使用 quantile")

    root_seed = np.random.SeedSequence(int(rng.integers(0, 2**63)))
    levels: list[np.ndarray] = [np.asarray(model.x0, dtype=float).reshape(1, 1)]
    child_probs: list[np.ndarray] = []
    for t in range(T):
        parents = levels[t]
        next_states = np.empty((parents.shape[0] * branching, 1))
        probs = np.empty((parents.shape[0], branching))
        for k in range(parents.shape[0]):
            node_rng = make_rng(root_seed, t, k)
            history = _history(levels, t, k, branching)
            draws = model.sample_next(history, S, node_rng)[:, 0]
            states, weights = _split_cells(draws, branching, partition)
            next_states[k * branching : (k + 1) * branching, 0] = states
            probs[k] = weights
        levels.append(next_states)
        child_probs.append(probs)

    tree = ScenarioTree(T, branching, tuple(levels), tuple(child_probs))
    logger.debug(
        f"[Tree] 已构造情景树 T={T} b={branching} S={S} 划分={partition} "
        f"节点数={tree.node_count()}"
    )
    return tree


def tree_expectation(tree: ScenarioTree, leaf_functional: Callable[[Path], float]) -> float:
    """Σ_叶 路径概率 × functional(根到叶路径)。"""
    probs = tree.path_probabilities()
    paths = tree.leaf_paths()
    return float(sum(prob * float(leaf_functional(Path(path))) for prob, path in zip(probs, paths)))


def dumps_tree(tree: ScenarioTree) -> str:
    """把情景树导出为逐行文本（格式见模块文档）。"""
    lines = [
        f"# scenario-tree horizon={tree.horizon} branching={tree.branching} "
        f"dimension={tree.dimension}"
    ]
    for node in tree.nodes():
        parent = "-" if node.parent is None else str(node.parent)
        state = ",".join(repr(v) for v in node.state)
        children = "|".join(f"{idx}:{prob!r}" for idx, prob in node.children) or "-"
        lines.append(f"{node.index} {node.depth} {parent} {state} {children}")
    return "\n".join(lines) + "\n"


def loads_tree(text: str) -> ScenarioTree:
    """从 `dumps_tree` 的文本读回情景树。"""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("# scenario-tree"):
        raise TreeError("缺少 scenario-tree 头部")
    header = dict(item.split("=", 1) for item in lines[0].split()[2:])
    T, b = int(header["horizon"]), int(header["branching"])
    states: list[list[list[float]]] = [[] for _ in range(T + 1)]
    probs: list[list[list[float]]] = [[] for _ in range(T)]
    for line in lines[1:]:
        _, depth_text, _, state_text, children_text = line.split()
        depth = int(depth_text)
        states[depth].append([float(v) for v in state_text.split(",")])
        if children_text != "-":
            probs[depth].append([float(item.split(":")[1]) for item in children_text.split("|")])
    return ScenarioTree(T, b, tuple(np.array(s) for s in states), tuple(np.array(p) for p in probs))


def write_tree(tree: ScenarioTree, path: str | FilePath) -> FilePath:
    """把情景树写入文本文件（原子写入）。"""
    return atomic_write_text(path, dumps_tree(tree))
