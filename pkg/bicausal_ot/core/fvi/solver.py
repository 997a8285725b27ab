"""拟合值迭代：逐期逆向回归代价函数 C_t(x_t, y_t)。

    C_T = 0,   C_t = inf_π ∫ [c_{t+1} + C_{t+1}] dπ

每个 t：从 μ⊗ν 抽 N 个截断到 t 的状态（t = 0 时全部取根），
对每个状态用 B 个条件后继构造经验 OT 得到目标值，再用 G 步 Adam 拟合共享网络。
"""

import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ...common.log import log_policy, logger
from ...common.rng import (
    STREAM_FVI_INIT,
    STREAM_FVI_SHUFFLE,
    STREAM_FVI_STATES,
    STREAM_FVI_TARGETS,
    make_rng,
)
from ..discrete_ot import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    SinkhornConvergenceError,
    exact_ot_uniform_value,
    sinkhorn,
)
from ..process import ProcessModel, StageCost, sample_product_batch
from .network import SeparableValueNet
from .optim import DEFAULT_CLIP, AdamState, ClipRange, adam_step

TargetMode = Literal["exact", "entropic"]


class FviError(ValueError):
    """FVI 配置或模型不合法。"""


class FviTargetError(RuntimeError):
    """某个状态的经验 Bellman 目标求解失败。"""

    def __init__(self, t: int, sample_index: int, reason: str) -> None:
        super().__init__(f"t={t} 第 {sample_index} 个状态的目标计算失败: {reason}")
        self.t = t
        self.sample_index = sample_index


@dataclass(frozen=True)
class FviConfig:
    """FVI 超参数。`clip=None` 表示按维数自动决定（d = 1 开启）。"""

    T: int
    d: int = 1
    N: int = 2000
    B: int = 50
    G: int = 50
    batch: int = 128
    lr: float = 0.01
    clip: bool | None = None
    clip_range: ClipRange = DEFAULT_CLIP
    tau: float = 1.0
    target: TargetMode = "exact"
    target_epsilon: float | None = None
    sinkhorn_tol: float = DEFAULT_TOL
    sinkhorn_max_iter: int = DEFAULT_MAX_ITER
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self) -> None:
        checks = (
            (self.T >= 1, f"T 必须 ≥ 1，实际为 {self.T}"),
            (self.d >= 1, f"d 必须 ≥ 1，实际为 {self.d}"),
            (self.B >= 1, f"B 必须 ≥ 1，实际为 {self.B}"),
            (self.G >= 1, f"G 必须 ≥ 1，实际为 {self.G}"),
            (1 <= self.batch <= self.N, f"需要 N ≥ batch ≥ 1，实际 N={self.N}, batch={self.batch}"),
            (self.lr > 0, f"lr 必须为正，实际为 {self.lr}"),
            (self.tau > 0, f"tau 必须为正，实际为 {self.tau}"),
            (self.clip_range[0] < self.clip_range[1], f"截断区间无效: {self.clip_range}"),
            (self.target in ("exact", "entropic"), f"未知的目标模式: {self.target!r}"),
        )
        for ok, message in checks:
            if not ok:
                raise FviError(message)
        if self.target == "entropic" and not (self.target_epsilon and self.target_epsilon > 0):
            raise FviError("entropic 目标模式需要正的 target_epsilon")
        if self.clip is None:
            object.__setattr__(self, "clip", self.d == 1)

    @property
    def active_clip(self) -> ClipRange | None:
        return self.clip_range if self.clip else None


@dataclass(frozen=True)
class FviStepDiagnostics:
    """单个时刻 t 的目标统计、损失曲线与耗时。"""

    t: int
    losses: tuple[float, ...]
    target_mean: float
    target_std: float
    target_min: float
    target_max: float
    target_seconds: float
    train_seconds: float


@dataclass(frozen=True)
class FviDiagnostics:
    steps: tuple[FviStepDiagnostics, ...] = ()
    total_seconds: float = 0.0
    raw_v0: float = 0.0
    clamped: bool = False


@dataclass(frozen=True)
class FviResult:
    net: SeparableValueNet = field(repr=False)
    v0_estimate: float
    diagnostics: FviDiagnostics


def _continuation(net: SeparableValueNet, h_next: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """C_{t+1}(x'_i, y'_j) 网格；h_next = 0 时为终端条件 0。"""
    B_x, B_y = xs.shape[0], ys.shape[0]
    if h_next == 0:
        return np.zeros((B_x, B_y))
    grid_x = np.repeat(xs, B_y, axis=0)
    grid_y = np.tile(ys, (B_x, 1))
    return net.forward_batch(h_next, grid_x, grid_y).reshape(B_x, B_y)


def empirical_bellman_target(
    net: SeparableValueNet,
    t: int,
    x_t: np.ndarray,
    y_t: np.ndarray,
    modelX: ProcessModel,
    modelY: ProcessModel,
    B: int,
    rng: np.random.Generator,
    *,
    cost: StageCost | None = None,
    target: TargetMode = "exact",
    epsilon: float | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> float:
    """单个状态的经验 Bellman 目标。

    x_t、y_t 可以是当前点（d 维）或完整历史（形状 (t+1, d)），条件采样器拿到的是历史。
    成本矩阵 M_ij = c_{t+1}(x'_i, y'_j) + C_{t+1}(x'_i, y'_j)，边际均为 1/B。

    Raises:
        SinkhornConvergenceError: 熵正则目标在 max_iter 内未收敛。
    """
    cost = cost or StageCost.squared()
    T = modelX.horizon
    if not 0 <= t <= T - 1:
        raise FviError(f"t 必须在 [0, {T - 1}] 内，实际为 {t}")
    history_x = np.atleast_2d(np.asarray(x_t, dtype=float))
    history_y = np.atleast_2d(np.asarray(y_t, dtype=float))
    rng_x, rng_y = rng.spawn(2)
    xs = modelX.sample_next(history_x, B, rng_x)
    ys = modelY.sample_next(history_y, B, rng_y)
    matrix = cost(t + 1, xs[:, None, :], ys[None, :, :]) + _continuation(net, T - t - 1, xs, ys)
    if target == "exact":
        return exact_ot_uniform_value(matrix)
    uniform = np.full(B, 1.0 / B)
    result = sinkhorn(matrix, uniform, uniform, float(epsilon), tol, max_iter)
    if not result.converged:
        raise SinkhornConvergenceError(result.iterations, result.epsilon)
    return result.value


def _sample_states(
    modelX: ProcessModel, modelY: ProcessModel, t: int, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """N 个截断到 t 的历史，形状 (N, t+1, d)；t = 0 时全部是根。"""
    if t == 0:
        xs = np.broadcast_to(modelX.x0, (count, 1, modelX.dimension)).copy()
        ys = np.broadcast_to(modelY.x0, (count, 1, modelY.dimension)).copy()
        return xs, ys
    return sample_product_batch(modelX, modelY, count, rng, horizon=t)


def _check_models(modelX: ProcessModel, modelY: ProcessModel, config: FviConfig) -> None:
    if modelX.horizon != config.T or modelY.horizon != config.T:
        raise FviError(
            f"模型期数 ({modelX.horizon}, {modelY.horizon}) 与配置 T={config.T} 不一致"
        )
    if modelX.dimension != config.d or modelY.dimension != config.d:
        raise FviError(
            f"模型维数 ({modelX.dimension}, {modelY.dimension}) 与配置 d={config.d} 不一致"
        )


def fit_value_functions(
    modelX: ProcessModel,
    modelY: ProcessModel,
    cost: StageCost | None = None,
    config: FviConfig | None = None,
) -> FviResult:
    """逆向逐期拟合共享的代价函数网络并给出 V0 估计。

    Raises:
        FviError: 配置与模型不一致。
        FviTargetError: 任一目标计算失败，带 (t, 样本序号)。
    """
    if config is None:
        raise FviError("缺少 FviConfig")
    cost = cost or StageCost.squared()
    _check_models(modelX, modelY, config)
    T = config.T
    started = time.perf_counter()
    net = SeparableValueNet.initialize(config.d, make_rng(config.seed, STREAM_FVI_INIT))
    state = AdamState.zeros(net.layout.size, lr=config.lr)
    steps: list[FviStepDiagnostics] = []

    for t in range(T - 1, -1, -1):
        h = T - t
        target_started = time.perf_counter()
        hist_x, hist_y = _sample_states(
            modelX, modelY, t, config.N, make_rng(config.seed, STREAM_FVI_STATES, t)
        )
        frozen = net.snapshot()
        targets = np.empty(config.N)
        for i in range(config.N):
            try:
                targets[i] = empirical_bellman_target(
                    frozen,
                    t,
                    hist_x[i],
                    hist_y[i],
                    modelX,
                    modelY,
                    config.B,
                    make_rng(config.seed, STREAM_FVI_TARGETS, t, i),
                    cost=cost,
                    target=config.target,
                    epsilon=config.target_epsilon,
                    tol=config.sinkhorn_tol,
                    max_iter=config.sinkhorn_max_iter,
                )
            except (ValueError, RuntimeError, FloatingPointError) as exc:
                raise FviTargetError(t, i, str(exc)) from exc
        if not np.all(np.isfinite(targets)):
            bad = int(np.flatnonzero(~np.isfinite(targets))[0])
            raise FviTargetError(t, bad, "目标值不是有限数")
        target_seconds = time.perf_counter() - target_started

        train_started = time.perf_counter()
        current_x = hist_x[:, -1, :]
        current_y = hist_y[:, -1, :]
        order = make_rng(config.seed, STREAM_FVI_SHUFFLE, t).permutation(config.N)
        losses: list[float] = []
        for step in range(config.G):
            idx = order[(step * config.batch + np.arange(config.batch)) % config.N]
            loss, grad = net.grad_loss(h, current_x[idx], current_y[idx], targets[idx], config.tau)
            net.params, state = adam_step(state, net.params, grad, config.active_clip)
            losses.append(loss)
        train_seconds = time.perf_counter() - train_started

        log_policy.log_fvi_step(t=t, horizon_to_go=h, losses=losses)
        steps.append(
            FviStepDiagnostics(
                t=t,
                losses=tuple(losses),
                target_mean=float(targets.mean()),
                target_std=float(targets.std()),
                target_min=float(targets.min()),
                target_max=float(targets.max()),
                target_seconds=target_seconds,
                train_seconds=train_seconds,
            )
        )

    raw_v0 = net.forward(T, modelX.x0, modelY.x0)
    estimate = max(raw_v0, 0.0)
    diagnostics = FviDiagnostics(
        steps=tuple(steps),
        total_seconds=time.perf_counter() - started,
        raw_v0=raw_v0,
        clamped=raw_v0 < 0.0,
    )
    logger.debug(
        f"[FVI] T={T} d={config.d} N={config.N} B={config.B} G={config.G} "
        f"V0={estimate:.6g} 耗时={diagnostics.total_seconds:.2f}s"
    )
    return FviResult(net=net, v0_estimate=estimate, diagnostics=diagnostics)


def value_estimate(
    net: SeparableValueNet,
    history_x: np.ndarray,
    history_y: np.ndarray,
    T: int,
    cost: StageCost | None = None,
) -> float:
    """部分历史 s_{0:t} 的完整价值：已发生成本 Σ_{u≤t} c_u + C_t(x_t, y_t)。"""
    cost = cost or StageCost.squared()
    history_x = np.atleast_2d(np.asarray(history_x, dtype=float))
    history_y = np.atleast_2d(np.asarray(history_y, dtype=float))
    if history_x.shape != history_y.shape:
        raise FviError(f"历史形状不一致: {history_x.shape} vs {history_y.shape}")
    t = history_x.shape[0] - 1
    if t > T:
        raise FviError(f"历史长度 {t} 超过期数 T={T}")
    accrued = sum(float(cost(u, history_x[u], history_y[u])) for u in range(1, t + 1))
    if t == T:
        return accrued
    return accrued + net.forward(T - t, history_x[-1], history_y[-1])
