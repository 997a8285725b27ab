"""有限支撑上的 OT 内核：精确求解（运输单纯形 / 指派）与 log 域 Sinkhorn。

三个后端的单步子问题都落到这里：
- `exact_ot`：运输单纯形（西北角初始解、Dantzig 进基、退化时切换 Bland 规则）；
  均匀等规模边际走指派问题快速路径。
- `exact_ot_2x2_batch`：二叉树逐层批量求 2×2 精确 OT（枚举两个顶点）。
- `entropic_ot_2x2_batch`：二叉树上 2×2 熵正则 OT 的闭式解（解一元二次方程）。
- `sinkhorn` / `sinkhorn_batch`：log 域 Sinkhorn，目标为 ∫c dπ + ε·KL(π ‖ p⊗q)。
"""

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from ..common.log import logger

SIMPLEX_SUM_TOL = 1e-9
COUPLING_TOL = 1e-7
DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 10000
# 内部扰动量（反循环用），结果按未扰动边际重算。
_PERTURBATION = 1e-11
# 连续多少次非改进主元后改用 Bland 规则。
_BLAND_AFTER = 50


class TransportError(ValueError):
    """OT 输入不合法（维数、边际、正则参数等）。"""


class SinkhornConvergenceError(RuntimeError):
    """Sinkhorn 在迭代上限内未收敛；嵌套求解时带上出问题的 (深度, nx, ny)。"""

    def __init__(
        self,
        iterations: int,
        epsilon: float,
        depth: int | None = None,
        nx: int | None = None,
        ny: int | None = None,
    ) -> None:
        where = "" if depth is None else f"在深度 {depth} 的节点对 (nx={nx}, ny={ny}) 上 "
        super().__init__(f"Sinkhorn {where}{iterations} 次迭代后仍未收敛 (ε={epsilon})")
        self.iterations = iterations
        self.epsilon = epsilon
        self.depth = depth
        self.nx = nx
        self.ny = ny


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """有限支撑上的概率权重。"""

    weights: np.ndarray

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=float, copy=True).reshape(-1)
        if weights.size < 1:
            raise TransportError("离散测度至少需要一个原子")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise TransportError("离散测度的权重必须是非负有限数")
        if abs(weights.sum() - 1.0) > SIMPLEX_SUM_TOL:
            raise TransportError(f"离散测度权重之和为 {weights.sum():.12g}，应为 1")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def uniform(cls, n: int) -> "DiscreteMeasure":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """n×m 有限成本矩阵。"""

    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=float, copy=True)
        if entries.ndim != 2 or min(entries.shape) < 1:
            raise TransportError(f"成本矩阵必须是非空二维数组，实际形状 {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise TransportError("成本矩阵包含 NaN 或无穷")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True, eq=False)
class Coupling:
    """运输计划及其两个边际；构造时断言可行性。"""

    plan: np.ndarray
    row_marginal: DiscreteMeasure
    col_marginal: DiscreteMeasure

    def __post_init__(self) -> None:
        plan = np.array(self.plan, dtype=float, copy=True)
        n, m = len(self.row_marginal), len(self.col_marginal)
        if plan.shape != (n, m):
            raise TransportError(f"运输计划形状 {plan.shape} 与边际 ({n}, {m}) 不一致")
        if np.any(plan < 0) or not np.all(np.isfinite(plan)):
            raise TransportError("运输计划包含负值或非有限值")
        row_err = np.max(np.abs(plan.sum(axis=1) - self.row_marginal.weights))
        col_err = np.max(np.abs(plan.sum(axis=0) - self.col_marginal.weights))
        if row_err > COUPLING_TOL or col_err > COUPLING_TOL:
            raise TransportError(
                f"运输计划边际误差过大: row={row_err:.3e}, col={col_err:.3e}"
            )
        plan.setflags(write=False)
        object.__setattr__(self, "plan", plan)


@dataclass(frozen=True)
class OTResult:
    """精确 OT 的结果：最优值与一个最优顶点计划。"""

    value: float
    plan: Coupling


@dataclass(frozen=True)
class SinkhornResult:
    """单个 Sinkhorn 问题的结果。

    `value` 是返回计划上的熵目标 ∫c dπ + ε·KL(π ‖ p⊗q)，
    `linear_value` 是其中的线性部分 ∫c dπ。`f`、`g` 为成本单位的对偶势，
    `log_potentials` 为对应的 log 缩放 (f/ε, g/ε)。
    """

    value: float
    linear_value: float
    plan: Coupling
    f: np.ndarray
    g: np.ndarray
    epsilon: float
    iterations: int
    converged: bool

    @property
    def log_potentials(self) -> tuple[np.ndarray, np.ndarray]:
        return self.f / self.epsilon, self.g / self.epsilon


@dataclass(frozen=True)
class BatchSinkhornResult:
    """沿前导维度批量求解的 Sinkhorn 结果，数组形状为 batch 或 batch + (n, m)。"""

    values: np.ndarray
    linear_values: np.ndarray
    plans: np.ndarray
    f: np.ndarray
    g: np.ndarray
    converged: np.ndarray
    iterations: int


def _as_cost(cost: CostMatrix | np.ndarray) -> CostMatrix:
    return cost if isinstance(cost, CostMatrix) else CostMatrix(cost)


def _as_measure(measure: DiscreteMeasure | np.ndarray) -> DiscreteMeasure:
    return measure if isinstance(measure, DiscreteMeasure) else DiscreteMeasure(measure)


def _check_dimensions(cost: CostMatrix, p: DiscreteMeasure, q: DiscreteMeasure) -> None:
    if cost.shape != (len(p), len(q)):
        raise TransportError(
            f"维数不一致: 成本矩阵 {cost.shape}，边际 ({len(p)}, {len(q)})"
        )


def _is_uniform(weights: np.ndarray) -> bool:
    return float(np.ptp(weights)) <= 1e-15


# ---------------------------------------------------------------------------
# 运输单纯形
# ---------------------------------------------------------------------------


def _northwest_corner(supply: np.ndarray, demand: np.ndarray) -> list[tuple[int, int]]:
    """西北角法得到 n+m-1 个基格（允许零流量的退化基）。"""
    a = supply.copy()
    b = demand.copy()
    n, m = a.shape[0], b.shape[0]
    i = j = 0
    basis: list[tuple[int, int]] = []
    while i < n and j < m:
        basis.append((i, j))
        flow = min(a[i], b[j])
        a[i] -= flow
        b[j] -= flow
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return basis


def _tree_adjacency(basis: list[tuple[int, int]], n: int, m: int) -> list[list[int]]:
    """基格构成行/列二部图上的生成树；节点 0..n-1 为行，n..n+m-1 为列。"""
    adjacency: list[list[int]] = [[] for _ in range(n + m)]
    for cell_index, (i, j) in enumerate(basis):
        adjacency[i].append(cell_index)
        adjacency[n + j].append(cell_index)
    return adjacency


def _basis_flows(
    basis: list[tuple[int, int]], supply: np.ndarray, demand: np.ndarray
) -> np.ndarray:
    """在生成树上由叶子剥离求基解流量。"""
    n, m = supply.shape[0], demand.shape[0]
    adjacency = _tree_adjacency(basis, n, m)
    residual = np.concatenate([supply, demand]).astype(float)
    degree = [len(cells) for cells in adjacency]
    alive = [True] * len(basis)
    flows = np.zeros(len(basis))
    leaves = deque(node for node in range(n + m) if degree[node] == 1)
    while leaves:
        node = leaves.popleft()
        if degree[node] != 1:
            continue
        cell_index = next(c for c in adjacency[node] if alive[c])
        i, j = basis[cell_index]
        other = n + j if node == i else i
        flow = residual[node]
        flows[cell_index] = flow
        residual[node] = 0.0
        residual[other] -= flow
        alive[cell_index] = False
        degree[node] -= 1
        degree[other] -= 1
        if degree[other] == 1:
            leaves.append(other)
    return flows


def _simplex_multipliers(
    basis: list[tuple[int, int]], cost: np.ndarray, n: int, m: int
) -> tuple[np.ndarray, np.ndarray]:
    """解 u_i + v_j = C_ij（基格），取 u_0 = 0。"""
    adjacency = _tree_adjacency(basis, n, m)
    potential = np.full(n + m, np.nan)
    potential[0] = 0.0
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for cell_index in adjacency[node]:
            i, j = basis[cell_index]
            if node == i:
                other, value = n + j, cost[i, j] - potential[i]
            else:
                other, value = i, cost[i, j] - potential[n + j]
            if np.isnan(potential[other]):
                potential[other] = value
                queue.append(other)
    return potential[:n], potential[n:]


def _cycle_path(
    basis: list[tuple[int, int]], n: int, m: int, row: int, col: int
) -> list[int]:
    """树上从列节点 col 到行节点 row 的路径（按经过顺序返回基格下标）。"""
    adjacency = _tree_adjacency(basis, n, m)
    start, goal = n + col, row
    parent_cell: dict[int, int] = {start: -1}
    queue = deque([start])
    while queue and goal not in parent_cell:
        node = queue.popleft()
        for cell_index in adjacency[node]:
            i, j = basis[cell_index]
            other = i if node == n + j else n + j
            if other not in parent_cell:
                parent_cell[other] = cell_index
                queue.append(other)
    path: list[int] = []
    node = goal
    while node != start:
        cell_index = parent_cell[node]
        path.append(cell_index)
        i, j = basis[cell_index]
        node = n + j if node == i else i
    path.reverse()
    return path


def _transportation_simplex(
    cost: np.ndarray, supply: np.ndarray, demand: np.ndarray
) -> list[tuple[int, int]]:
    """在扰动后的边际上运行运输单纯形，返回最优基。"""
    n, m = cost.shape
    scale = max(1.0, float(np.max(np.abs(cost))))
    a = supply + _PERTURBATION
    b = demand.copy()
    b[-1] += n * _PERTURBATION
    basis = _northwest_corner(a, b)
    flows = _basis_flows(basis, a, b)
    use_bland = False
    stalled = 0
    max_pivots = 50 * n * m + 100

    for _ in range(max_pivots):
        u, v = _simplex_multipliers(basis, cost, n, m)
        reduced = cost - u[:, None] - v[None, :]
        for i, j in basis:
            reduced[i, j] = 0.0
        negative = reduced < -1e-12 * scale
        if not negative.any():
            return basis

        if use_bland:
            flat = int(np.flatnonzero(negative)[0])
        else:
            flat = int(np.argmin(reduced))
        enter_i, enter_j = divmod(flat, m)

        path = _cycle_path(basis, n, m, enter_i, enter_j)
        minus_cells = path[0::2]
        theta_candidates = [(flows[c], basis[c], c) for c in minus_cells]
        theta, _, leave_index = min(theta_candidates)
        if theta <= 1e-15:
            stalled += 1
            if stalled >= _BLAND_AFTER and not use_bland:
                use_bland = True
                logger.debug("[OT] 检测到连续退化主元，切换为 Bland 规则")
        else:
            stalled = 0

        for position, cell_index in enumerate(path):
            flows[cell_index] += -theta if position % 2 == 0 else theta
        basis[leave_index] = (enter_i, enter_j)
        flows[leave_index] = theta

    raise TransportError(f"运输单纯形在 {max_pivots} 次主元后仍未收敛")


def exact_ot(
    cost: CostMatrix | np.ndarray,
    p: DiscreteMeasure | np.ndarray,
    q: DiscreteMeasure | np.ndarray,
) -> OTResult:
    """精确求解 min_π Σ π_ij C_ij，π ∈ Π(p, q)。

    Args:
        cost: n×m 成本矩阵。
        p: 行边际（n 个原子）。
        q: 列边际（m 个原子）。

    Returns:
        OTResult，`plan` 为任意一个最优顶点。

    Raises:
        TransportError: 维数不一致或边际不在单纯形上。
    """
    cost = _as_cost(cost)
    p = _as_measure(p)
    q = _as_measure(q)
    _check_dimensions(cost, p, q)
    C = cost.entries
    n, m = C.shape

    if n == m and _is_uniform(p.weights) and _is_uniform(q.weights):
        rows, cols = linear_sum_assignment(C)
        plan = np.zeros((n, m))
        plan[rows, cols] = 1.0 / n
        return OTResult(float(C[rows, cols].sum() / n), Coupling(plan, p, q))

    if n == 1 or m == 1:
        plan = np.outer(p.weights, q.weights)
        return OTResult(float(np.sum(plan * C)), Coupling(plan, p, q))

    basis = _transportation_simplex(C, p.weights, q.weights)
    flows = np.clip(_basis_flows(basis, p.weights, q.weights), 0.0, None)
    plan = np.zeros((n, m))
    for (i, j), flow in zip(basis, flows):
        plan[i, j] = flow
    return OTResult(float(np.sum(plan * C)), Coupling(plan, p, q))


def exact_ot_uniform_value(cost: np.ndarray) -> float:
    """均匀、等规模边际下的精确 OT 值（指派问题）。"""
    cost = np.asarray(cost, dtype=float)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def exact_ot_2x2_batch(
    cost: np.ndarray, p: np.ndarray, q: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """批量 2×2 精确 OT。

    可行集是 π_11 ∈ [max(0, p_1 + q_1 - 1), min(p_1, q_1)] 上的线段，
    线性目标在两个端点之一取到最小值。

    Args:
        cost: 形状 (..., 2, 2)。
        p: 形状 (..., 2)，可与 cost 的前导维度广播。
        q: 形状 (..., 2)。

    Returns:
        (values, plans)，形状分别为 batch 与 batch + (2, 2)。
    """
    cost = np.asarray(cost, dtype=float)
    p1 = np.asarray(p, dtype=float)[..., 0]
    q1 = np.asarray(q, dtype=float)[..., 0]
    c11, c12 = cost[..., 0, 0], cost[..., 0, 1]
    c21, c22 = cost[..., 1, 0], cost[..., 1, 1]

    def objective(a: np.ndarray) -> np.ndarray:
        return c11 * a + c12 * (p1 - a) + c21 * (q1 - a) + c22 * (1.0 - p1 - q1 + a)

    lo = np.maximum(0.0, p1 + q1 - 1.0)
    hi = np.minimum(p1, q1)
    lo_value, hi_value = objective(lo), objective(hi)
    take_lo = lo_value <= hi_value
    a = np.where(take_lo, lo, hi)
    values = np.where(take_lo, lo_value, hi_value)

    plans = np.empty(values.shape + (2, 2))
    plans[..., 0, 0] = a
    plans[..., 0, 1] = p1 - a
    plans[..., 1, 0] = q1 - a
    plans[..., 1, 1] = 1.0 - p1 - q1 + a
    np.clip(plans, 0.0, None, out=plans)
    return values, plans


def entropic_ot_2x2_batch(
    cost: np.ndarray, p: np.ndarray, q: np.ndarray, epsilon: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """批量 2×2 熵正则 OT 的闭式解。

    最优计划满足 π_11·π_22 / (π_12·π_21) = κ，κ = exp(-(c_11 + c_22 - c_12 - c_21) / ε)，
    记 a = π_11，即 a·(1 - p_1 - q_1 + a) = κ·(p_1 - a)·(q_1 - a)，
    在可行线段 [max(0, p_1 + q_1 - 1), min(p_1, q_1)] 内恰有一个根。
    κ > 1 时方程两边同除以 κ，系数只用到 exp(-|s|) ≤ 1。

    Args:
        cost: 形状 (..., 2, 2)。
        p: 形状 (..., 2)，必须严格为正。
        q: 形状 (..., 2)，必须严格为正。
        epsilon: 正则参数，必须 > 0。

    Returns:
        (values, linear_values, plans)，values 为熵目标 ∫c dπ + ε·KL(π ‖ p⊗q)。
    """
    if not epsilon > 0:
        raise TransportError(f"epsilon 必须为正数，实际为 {epsilon}")
    cost = np.asarray(cost, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(p <= 0) or np.any(q <= 0):
        raise TransportError("熵正则 OT 要求边际权重严格为正")
    batch_shape = np.broadcast_shapes(cost.shape[:-2], p.shape[:-1], q.shape[:-1])
    cost = np.broadcast_to(cost, batch_shape + (2, 2))
    p = np.broadcast_to(p, batch_shape + (2,))
    q = np.broadcast_to(q, batch_shape + (2,))
    p1, q1 = p[..., 0], q[..., 0]
    rest = 1.0 - p1 - q1

    s = -(cost[..., 0, 0] + cost[..., 1, 1] - cost[..., 0, 1] - cost[..., 1, 0]) / epsilon
    k = np.exp(-np.abs(s))
    small = s <= 0.0
    A = np.where(small, 1.0 - k, k - 1.0)
    B = np.where(small, rest + k * (p1 + q1), k * rest + p1 + q1)
    C = np.where(small, -k * p1 * q1, -p1 * q1)
    root = np.sqrt(np.clip(B * B - 4.0 * A * C, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(B >= 0.0, -2.0 * C / (B + root), (root - B) / (2.0 * A))
    a = np.clip(np.nan_to_num(a), np.maximum(0.0, p1 + q1 - 1.0), np.minimum(p1, q1))

    plans = np.empty(batch_shape + (2, 2))
    plans[..., 0, 0] = a
    plans[..., 0, 1] = p1 - a
    plans[..., 1, 0] = q1 - a
    plans[..., 1, 1] = rest + a
    np.clip(plans, 0.0, None, out=plans)
    values, linear = _entropic_objective(plans, cost, np.log(p), np.log(q), epsilon)
    return values, linear, plans


# ---------------------------------------------------------------------------
# Sinkhorn
# ---------------------------------------------------------------------------


def _round_to_feasible(plan: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """把近似计划投影回运输多面体（先按行、列缩小，再补秩一修正）。"""
    row = plan.sum(axis=-1)
    scale_r = np.minimum(np.divide(p, row, out=np.ones_like(row), where=row > 0), 1.0)
    plan = plan * scale_r[..., :, None]
    col = plan.sum(axis=-2)
    scale_c = np.minimum(np.divide(q, col, out=np.ones_like(col), where=col > 0), 1.0)
    plan = plan * scale_c[..., None, :]
    err_r = np.clip(p - plan.sum(axis=-1), 0.0, None)
    err_c = np.clip(q - plan.sum(axis=-2), 0.0, None)
    mass = err_r.sum(axis=-1)
    safe = np.where(mass > 0, mass, 1.0)
    correction = err_r[..., :, None] * err_c[..., None, :] / safe[..., None, None]
    return plan + np.where(mass[..., None, None] > 0, correction, 0.0)


def _entropic_objective(
    plan: np.ndarray, cost: np.ndarray, log_p: np.ndarray, log_q: np.ndarray, epsilon: float
) -> tuple[np.ndarray, np.ndarray]:
    linear = np.sum(plan * cost, axis=(-2, -1))
    log_ref = log_p[..., :, None] + log_q[..., None, :]
    positive = plan > 0
    log_plan = np.log(np.where(positive, plan, 1.0))
    kl = np.sum(np.where(positive, plan * (log_plan - log_ref), 0.0), axis=(-2, -1))
    return linear + epsilon * kl, linear


def _epsilon_stages(cost: np.ndarray, epsilon: float, scaling: bool) -> list[float]:
    if not scaling:
        return [epsilon]
    span = float(np.max(cost) - np.min(cost))
    stages = []
    current = max(span, epsilon)
    while current > epsilon * 2.0:
        stages.append(current)
        current *= 0.5
    stages.append(epsilon)
    return stages


def sinkhorn_batch(
    cost: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    epsilon_scaling: bool = True,
) -> BatchSinkhornResult:
    """沿前导维度批量运行 log 域 Sinkhorn。

    一次迭代先更新行势 f、再更新列势 g；当每个子问题的对偶势
    sup 范数变化都小于 tol，或总迭代数达到 max_iter 时停止。
    开启 epsilon_scaling 时按 ε 由大到小逐级热启动，最终一级使用目标 ε。

    Args:
        cost: 形状 batch + (n, m)。
        p: 行边际，形状可广播到 batch + (n,)，必须严格为正。
        q: 列边际，形状可广播到 batch + (m,)，必须严格为正。
        epsilon: 正则参数，必须 > 0。
        tol: 对偶势变化阈值。
        max_iter: 迭代上限（所有 ε 级别合计）。
        epsilon_scaling: 是否使用 ε 逐级热启动。

    Returns:
        BatchSinkhornResult；`converged` 标记每个子问题是否满足 tol。
    """
    if not epsilon > 0:
        raise TransportError(f"epsilon 必须为正数，实际为 {epsilon}")
    if not tol > 0 or int(max_iter) < 1:
        raise TransportError("tol 必须为正且 max_iter 必须为正整数")
    cost = np.asarray(cost, dtype=float)
    if cost.ndim < 2 or not np.all(np.isfinite(cost)):
        raise TransportError("成本数组必须至少二维且全部有限")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(p <= 0) or np.any(q <= 0):
        raise TransportError("Sinkhorn 要求边际权重严格为正（零权重原子应由调用方剔除）")
    batch_shape = cost.shape[:-2]
    n, m = cost.shape[-2:]
    log_p = np.broadcast_to(np.log(p), batch_shape + (n,))
    log_q = np.broadcast_to(np.log(q), batch_shape + (m,))

    f = np.zeros(batch_shape + (n,))
    g = np.zeros(batch_shape + (m,))
    delta = np.full(batch_shape, np.inf)
    iterations = 0
    stages = _epsilon_stages(cost, epsilon, epsilon_scaling)
    reached_last = False
    for stage_index, eps in enumerate(stages):
        if iterations >= max_iter:
            break
        is_last = stage_index == len(stages) - 1
        reached_last = is_last
        stage_tol = tol if is_last else max(tol, 1e-3 * eps)
        delta = np.full(batch_shape, np.inf)
        while iterations < max_iter:
            iterations += 1
            f_new = -eps * logsumexp(log_q[..., None, :] + (g[..., None, :] - cost) / eps, axis=-1)
            g_new = -eps * logsumexp(log_p[..., :, None] + (f_new[..., :, None] - cost) / eps, axis=-2)
            delta = np.maximum(
                np.max(np.abs(f_new - f), axis=-1), np.max(np.abs(g_new - g), axis=-1)
            )
            f, g = f_new, g_new
            if np.all(delta < stage_tol):
                break

    if reached_last:
        converged = delta < tol
    else:
        # 迭代预算在较大 ε 级别耗尽：在目标 ε 上补一次行势更新，保证计划有限
        f = -epsilon * logsumexp(log_q[..., None, :] + (g[..., None, :] - cost) / epsilon, axis=-1)
        converged = np.zeros(batch_shape, dtype=bool)
    log_plan = log_p[..., :, None] + log_q[..., None, :] + (f[..., :, None] + g[..., None, :] - cost) / epsilon
    plans = _round_to_feasible(np.exp(log_plan), np.exp(log_p), np.exp(log_q))
    values, linear = _entropic_objective(plans, cost, log_p, log_q, epsilon)
    return BatchSinkhornResult(
        values=values,
        linear_values=linear,
        plans=plans,
        f=f,
        g=g,
        converged=converged,
        iterations=iterations,
    )


def sinkhorn(
    cost: CostMatrix | np.ndarray,
    p: DiscreteMeasure | np.ndarray,
    q: DiscreteMeasure | np.ndarray,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    epsilon_scaling: bool = True,
) -> SinkhornResult:
    """熵正则 OT：min_π ∫c dπ + ε·KL(π ‖ p⊗q)。

    未收敛时不会抛异常，而是返回 `converged=False` 并记录 warning。
    """
    cost = _as_cost(cost)
    p = _as_measure(p)
    q = _as_measure(q)
    _check_dimensions(cost, p, q)
    batch = sinkhorn_batch(
        cost.entries, p.weights, q.weights, epsilon, tol, max_iter, epsilon_scaling
    )
    converged = bool(batch.converged)
    if not converged:
        logger.warning(
            f"[Sinkhorn] {batch.iterations} 次迭代后仍未收敛 (ε={epsilon}, tol={tol})"
        )
    return SinkhornResult(
        value=float(batch.values),
        linear_value=float(batch.linear_values),
        plan=Coupling(batch.plans, p, q),
        f=batch.f,
        g=batch.g,
        epsilon=float(epsilon),
        iterations=batch.iterations,
        converged=converged,
    )


def kl_divergence(
    pi: Coupling, rho: np.ndarray | tuple[np.ndarray, np.ndarray] | None = None
) -> float:
    """KL(π ‖ ρ) = Σ π_ij ln(π_ij / ρ_ij)，约定 0·ln 0 = 0。

    Args:
        pi: 运输计划。
        rho: 参考乘积测度；可给 (n, m) 矩阵或 (p, q) 二元组，缺省为 π 自身边际的乘积。

    Raises:
        TransportError: π 在 ρ 为零处有正质量。
    """
    if rho is None:
        reference = np.outer(pi.row_marginal.weights, pi.col_marginal.weights)
    elif isinstance(rho, tuple):
        reference = np.outer(np.asarray(rho[0], dtype=float), np.asarray(rho[1], dtype=float))
    else:
        reference = np.asarray(rho, dtype=float)
    plan = pi.plan
    if reference.shape != plan.shape:
        raise TransportError(f"参考测度形状 {reference.shape} 与计划 {plan.shape} 不一致")
    positive = plan > 0
    if np.any(positive & (reference <= 0)):
        raise TransportError("π 不关于参考测度绝对连续")
    ratio = np.where(positive, plan / np.where(reference > 0, reference, 1.0), 1.0)
    kl = float(np.sum(np.where(positive, plan * np.log(ratio), 0.0)))
    return max(kl, 0.0)


def wasserstein_p_1d(xs: np.ndarray, ys: np.ndarray, p: float = 2.0) -> float:
    """等权、等样本量一维经验测度之间的 W_p：排序后逐点匹配。"""
    xs = np.sort(np.asarray(xs, dtype=float).reshape(-1))
    ys = np.sort(np.asarray(ys, dtype=float).reshape(-1))
    if xs.shape != ys.shape:
        raise TransportError(f"样本数量不一致: {xs.shape[0]} vs {ys.shape[0]}")
    if xs.size == 0:
        raise TransportError("样本不能为空")
    if not p >= 1:
        raise TransportError(f"阶数 p 必须 ≥ 1，实际为 {p}")
    return float(np.mean(np.abs(xs - ys) ** p) ** (1.0 / p))
