"""两棵情景树之间双因果 OT 的逆向归纳求解：精确（逐节点对 LP）与嵌套熵正则。

两者共用同一套递推：
    U_T(nx, ny) = c_T(x, y)
    U_t(nx, ny) = c_t(x, y)·1{t ≥ 1} + OT(U_{t+1}(子节点对), p_nx, q_ny)
成本时间可分且树核只依赖当前节点，所以价值表只需按 (节点, 节点) 索引。
每一层的所有节点对一次性批量求解，层与层之间顺序推进。
"""

import time
from dataclasses import dataclass

import numpy as np

from ..common.log import log_policy, logger
from .discrete_ot import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    SinkhornConvergenceError,
    entropic_ot_2x2_batch,
    exact_ot,
    exact_ot_2x2_batch,
    sinkhorn_batch,
)
from .process import StageCost
from .quantization import ScenarioTree

# 价值表规模为 O(b^{2T})，超过该期数直接拒绝。
MAX_TREE_HORIZON = 13


class BicausalError(ValueError):
    """两棵树不兼容或超出规模上限。"""


@dataclass(frozen=True, eq=False)
class NodePairValueTable:
    """每个深度 t 一个 (b^t × b^t) 的价值矩阵 U_t(nx, ny)。"""

    values: tuple[np.ndarray, ...]

    def __getitem__(self, depth: int) -> np.ndarray:
        return self.values[depth]

    def __len__(self) -> int:
        return len(self.values)

    @property
    def root_value(self) -> float:
        return float(self.values[0][0, 0])


@dataclass(frozen=True)
class BackwardLPResult:
    value: float
    table: NodePairValueTable


@dataclass(frozen=True)
class NestedSinkhornResult:
    """嵌套熵正则逆向归纳结果。

    `value` 为根节点处的熵目标（含逐层 KL 惩罚），
    `linear_value` 为诱导计划下的纯线性成本 ∫c dπ，两者分开报告。
    """

    value: float
    table: NodePairValueTable
    linear_value: float
    linear_table: NodePairValueTable
    epsilon: float


def _check_trees(treeX: ScenarioTree, treeY: ScenarioTree) -> None:
    if treeX.horizon != treeY.horizon:
        raise BicausalError(f"两棵树期数不一致: {treeX.horizon} vs {treeY.horizon}")
    if treeX.branching != treeY.branching:
        raise BicausalError(f"两棵树分叉数不一致: {treeX.branching} vs {treeY.branching}")
    if treeX.dimension != 1 or treeY.dimension != 1:
        raise BicausalError("tree methods require d=1")
    if treeX.horizon > MAX_TREE_HORIZON:
        raise BicausalError(
            f"期数 T={treeX.horizon} 超过树方法上限 {MAX_TREE_HORIZON}（价值表规模随 4^T 增长）"
        )


def _stage_matrix(cost: StageCost, t: int, treeX: ScenarioTree, treeY: ScenarioTree) -> np.ndarray:
    xs = treeX.states[t]
    ys = treeY.states[t]
    return cost(t, xs[:, None, :], ys[None, :, :])


def _children_grid(next_values: np.ndarray, parents: int, branching: int) -> np.ndarray:
    """把 U_{t+1} 重排为 (nx, ny, i, j)：每个父节点对的子节点成本矩阵。"""
    return next_values.reshape(parents, branching, parents, branching).transpose(0, 2, 1, 3)


def backward_lp_value(
    treeX: ScenarioTree, treeY: ScenarioTree, cost: StageCost | None = None
) -> BackwardLPResult:
    """逐层逆向归纳，每个节点对求一次精确 OT。

    二叉树走批量 2×2 闭式解，其余分叉逐对调用运输单纯形。

    Raises:
        BicausalError: 期数/分叉数不一致、d > 1 或 T 超过上限。
    """
    _check_trees(treeX, treeY)
    cost = cost or StageCost.squared()
    T, b = treeX.horizon, treeX.branching
    started = time.perf_counter()

    tables: list[np.ndarray] = [np.empty(0)] * (T + 1)
    tables[T] = _stage_matrix(cost, T, treeX, treeY)
    for t in range(T - 1, -1, -1):
        depth_started = time.perf_counter()
        parents = b**t
        grid = _children_grid(tables[t + 1], parents, b)
        px = treeX.child_probs[t]
        py = treeY.child_probs[t]
        if b == 2:
            continuation, _ = exact_ot_2x2_batch(grid, px[:, None, :], py[None, :, :])
        else:
            continuation = np.empty((parents, parents))
            for nx in range(parents):
                for ny in range(parents):
                    continuation[nx, ny] = exact_ot(grid[nx, ny], px[nx], py[ny]).value
        stage = _stage_matrix(cost, t, treeX, treeY) if t >= 1 else 0.0
        tables[t] = stage + continuation
        log_policy.log_depth_done(
            tag="TreeLP",
            depth=t,
            pairs=parents * parents,
            duration=time.perf_counter() - depth_started,
        )

    table = NodePairValueTable(tuple(tables))
    logger.debug(
        f"[TreeLP] T={T} b={b} 根价值={table.root_value:.6g} "
        f"耗时={time.perf_counter() - started:.3f}s"
    )
    return BackwardLPResult(table.root_value, table)


def nested_sinkhorn_value(
    treeX: ScenarioTree,
    treeY: ScenarioTree,
    cost: StageCost | None = None,
    epsilon: float = 0.1,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    epsilon_scaling: bool = True,
) -> NestedSinkhornResult:
    """与 `backward_lp_value` 相同的递推，把每个节点对的精确 OT 换成 Sinkhorn。

    同时沿诱导计划累积线性成本，得到不含 KL 惩罚的 `linear_value`。
    二叉树的每个 2×2 子问题直接用闭式解（`entropic_ot_2x2_batch`），
    此时 tol、max_iter 与 epsilon_scaling 不起作用。

    Raises:
        BicausalError: 树不兼容。
        SinkhornConvergenceError: 多叉树上任一节点对未收敛，异常中带有 (深度, nx, ny)。
    """
    _check_trees(treeX, treeY)
    cost = cost or StageCost.squared()
    T, b = treeX.horizon, treeX.branching
    started = time.perf_counter()

    tables: list[np.ndarray] = [np.empty(0)] * (T + 1)
    linear_tables: list[np.ndarray] = [np.empty(0)] * (T + 1)
    tables[T] = _stage_matrix(cost, T, treeX, treeY)
    linear_tables[T] = tables[T]
    for t in range(T - 1, -1, -1):
        depth_started = time.perf_counter()
        parents = b**t
        grid = _children_grid(tables[t + 1], parents, b)
        linear_grid = _children_grid(linear_tables[t + 1], parents, b)
        px = treeX.child_probs[t][:, None, :]
        py = treeY.child_probs[t][None, :, :]
        if b == 2:
            values, _, plans = entropic_ot_2x2_batch(grid, px, py, epsilon)
        else:
            result = sinkhorn_batch(grid, px, py, epsilon, tol, max_iter, epsilon_scaling)
            if not np.all(result.converged):
                nx, ny = (int(v) for v in np.argwhere(~result.converged)[0])
                raise SinkhornConvergenceError(result.iterations, epsilon, depth=t, nx=nx, ny=ny)
            values, plans = result.values, result.plans
        stage = _stage_matrix(cost, t, treeX, treeY) if t >= 1 else 0.0
        tables[t] = stage + values
        linear_tables[t] = stage + np.sum(plans * linear_grid, axis=(-2, -1))
        log_policy.log_depth_done(
            tag="NestedSinkhorn",
            depth=t,
            pairs=parents * parents,
            duration=time.perf_counter() - depth_started,
        )

    table = NodePairValueTable(tuple(tables))
    linear_table = NodePairValueTable(tuple(linear_tables))
    logger.debug(
        f"[NestedSinkhorn] T={T} ε={epsilon} 熵目标={table.root_value:.6g} "
        f"线性部分={linear_table.root_value:.6g} 耗时={time.perf_counter() - started:.3f}s"
    )
    return NestedSinkhornResult(
        value=table.root_value,
        table=table,
        linear_value=linear_table.root_value,
        linear_table=linear_table,
        epsilon=float(epsilon),
    )
