"""路径空间数据模型、Gaussian AR(1) 参考过程与通用条件采样接口。

所有求解器只通过 `ProcessModel.sample_next(history, count, rng)` 访问边际律，
AR(1) 额外提供整段路径的向量化采样。
"""

from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from ..common.log import logger

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-12

StageEvaluator = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


class ProcessError(ValueError):
    """过程模型或路径不满足约束。"""


def _as_readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Path:
    """一条 d 维路径 x_0, ..., x_T，内部存为 (T+1, d) 只读数组。"""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ProcessError(f"路径形状必须为 (T+1, d)，实际为 {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ProcessError("路径包含非有限值")
        object.__setattr__(self, "values", _as_readonly(values))

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, t: int) -> np.ndarray:
        return self.values[t]

    def prefix(self, t: int) -> np.ndarray:
        """返回 x_{0:t}，形状 (t+1, d)。"""
        return self.values[: t + 1]


class ProcessModel(ABC):
    """条件采样器定义的路径律。

    子类需提供 `dimension`、`horizon`、`x0` 以及 `sample_next`；
    `sample_paths` 默认逐步调用 `sample_next`，子类可覆盖为向量化实现。
    """

    dimension: int
    horizon: int
    x0: np.ndarray

    @abstractmethod
    def sample_next(
        self, history: np.ndarray, count: int, rng: np.random.Generator
    ) -> np.ndarray:
        """给定历史 x_{0:t}（形状 (t+1, d)），抽取 count 个 x_{t+1}，返回 (count, d)。"""

    @abstractmethod
    def with_horizon(self, horizon: int) -> "ProcessModel":
        """返回只改变期数的同一模型。"""

    def sample_paths(
        self, count: int, rng: np.random.Generator, horizon: int | None = None
    ) -> np.ndarray:
        """抽取 count 条长度为 horizon+1 的路径，返回 (count, horizon+1, d)。"""
        horizon = self.horizon if horizon is None else int(horizon)
        paths = np.empty((count, horizon + 1, self.dimension))
        paths[:, 0, :] = self.x0
        for n in range(count):
            for t in range(horizon):
                paths[n, t + 1] = self.sample_next(paths[n, : t + 1], 1, rng)[0]
        return paths


def _covariance_factor(covariance: np.ndarray) -> np.ndarray:
    """返回 L 使得 L @ L.T == covariance；半正定时回退到特征分解。"""
    try:
        return np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError:
        eigenvalues, eigenvectors = np.linalg.eigh(covariance)
        return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


def validate_covariance(covariance: np.ndarray, dimension: int) -> np.ndarray:
    """校验协方差矩阵：形状 d×d、对称（1e-12）、特征值 ≥ -1e-12。"""
    covariance = np.atleast_2d(np.asarray(covariance, dtype=float))
    if covariance.shape != (dimension, dimension):
        raise ProcessError(
            f"协方差形状 {covariance.shape} 与维数 d={dimension} 不一致"
        )
    if not np.all(np.isfinite(covariance)):
        raise ProcessError("协方差包含非有限值")
    if np.max(np.abs(covariance - covariance.T)) > SYMMETRY_TOL:
        raise ProcessError("协方差矩阵不对称")
    if np.linalg.eigvalsh(covariance).min() < -PSD_TOL:
        raise ProcessError("协方差矩阵不是半正定的")
    return covariance


@dataclass(frozen=True, eq=False)
class GaussianAR1(ProcessModel):
    """x_{t+1} = x_t + λ_t，λ_t ~ N(0, Σ)，x_0 固定。"""

    x0: np.ndarray
    covariance: np.ndarray
    horizon: int = 1
    _factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.ndim != 1 or not np.all(np.isfinite(x0)):
            raise ProcessError("x0 必须是有限的 d 维向量")
        if int(self.horizon) < 1:
            raise ProcessError(f"期数 T 必须为正整数，实际为 {self.horizon}")
        covariance = validate_covariance(self.covariance, x0.shape[0])
        object.__setattr__(self, "x0", _as_readonly(x0))
        object.__setattr__(self, "covariance", _as_readonly(covariance))
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "_factor", _as_readonly(_covariance_factor(covariance)))

    @property
    def dimension(self) -> int:
        return self.x0.shape[0]

    def with_horizon(self, horizon: int) -> "GaussianAR1":
        return GaussianAR1(self.x0, self.covariance, horizon)

    def sample_next(
        self, history: np.ndarray, count: int, rng: np.random.Generator
    ) -> np.ndarray:
        current = np.asarray(history, dtype=float).reshape(-1, self.dimension)[-1]
        noise = rng.standard_normal((count, self.dimension)) @ self._factor.T
        return current + noise

    def sample_paths(
        self, count: int, rng: np.random.Generator, horizon: int | None = None
    ) -> np.ndarray:
        horizon = self.horizon if horizon is None else int(horizon)
        paths = np.empty((count, horizon + 1, self.dimension))
        paths[:, 0, :] = self.x0
        if horizon > 0:
            noise = rng.standard_normal((count, horizon, self.dimension)) @ self._factor.T
            paths[:, 1:, :] = self.x0 + np.cumsum(noise, axis=1)
        return paths


@dataclass(frozen=True, eq=False)
class SamplerProcess(ProcessModel):
    """用任意条件采样函数 `sampler(history, count, rng)` 定义的过程。"""

    x0: np.ndarray
    sampler: Callable[[np.ndarray, int, np.random.Generator], np.ndarray]
    horizon: int = 1

    def __post_init__(self) -> None:
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.ndim != 1 or not np.all(np.isfinite(x0)):
            raise ProcessError("x0 必须是有限的 d 维向量")
        if int(self.horizon) < 1:
            raise ProcessError(f"期数 T 必须为正整数，实际为 {self.horizon}")
        object.__setattr__(self, "x0", _as_readonly(x0))
        object.__setattr__(self, "horizon", int(self.horizon))

    @property
    def dimension(self) -> int:
        return self.x0.shape[0]

    def with_horizon(self, horizon: int) -> "SamplerProcess":
        return SamplerProcess(self.x0, self.sampler, horizon)

    def sample_next(
        self, history: np.ndarray, count: int, rng: np.random.Generator
    ) -> np.ndarray:
        draws = np.asarray(self.sampler(history, count, rng), dtype=float)
        draws = draws.reshape(count, -1)
        if draws.shape[1] != self.dimension:
            raise ProcessError(
                f"采样器输出维数 {draws.shape[1]} 与模型维数 {self.dimension} 不一致"
            )
        return draws


def squared_distance(t: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """|x - y|^2，沿最后一维求和，其余维度广播。"""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return np.sum(diff * diff, axis=-1)


@dataclass(frozen=True)
class StageCost:
    """时间可分的阶段成本 c(s_{1:T}) = Σ_{t=1}^T evaluator(t, x_t, y_t)。

    evaluator 需对前导维度向量化：x、y 形状 (..., d)，返回 (...)。
    """

    evaluator: StageEvaluator = squared_distance
    name: str = "squared"

    def __call__(self, t: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluator(t, x, y), dtype=float)

    @classmethod
    def squared(cls) -> "StageCost":
        return cls(squared_distance, "squared")


def sample_path(model: ProcessModel, rng: np.random.Generator) -> Path:
    """从 model 抽取一条完整路径。"""
    return Path(model.sample_paths(1, rng)[0])


def _check_same_horizon(modelX: ProcessModel, modelY: ProcessModel) -> int:
    if modelX.horizon != modelY.horizon:
        raise ProcessError(
            f"两个过程的期数不一致: T_x={modelX.horizon}, T_y={modelY.horizon}"
        )
    return modelX.horizon


def sample_product_batch(
    modelX: ProcessModel,
    modelY: ProcessModel,
    count: int,
    rng: np.random.Generator,
    horizon: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """从 β = μ ⊗ ν 抽取 count 对路径（截断到 horizon），返回两个 (count, h+1, d) 数组。

    X、Y 分量分别使用 rng 派生出的两条独立子流。
    """
    full_horizon = _check_same_horizon(modelX, modelY)
    horizon = full_horizon if horizon is None else int(horizon)
    rng_x, rng_y = rng.spawn(2)
    return (
        modelX.sample_paths(count, rng_x, horizon),
        modelY.sample_paths(count, rng_y, horizon),
    )


def sample_product_paths(
    modelX: ProcessModel, modelY: ProcessModel, count: int, rng: np.random.Generator
) -> list[tuple[Path, Path]]:
    """抽取 count 对相互独立的 (X 路径, Y 路径)。"""
    xs, ys = sample_product_batch(modelX, modelY, count, rng)
    logger.debug(f"[Process] 已抽取 {count} 对乘积路径 (T={xs.shape[1] - 1})")
    return [(Path(x), Path(y)) for x, y in zip(xs, ys)]


def path_cost(cost: StageCost, pathX: Path, pathY: Path) -> float:
    """Σ_{t=1}^T c_t(x_t, y_t)，t = 0 不计入。"""
    if len(pathX) != len(pathY):
        raise ProcessError(f"路径长度不一致: {len(pathX)} vs {len(pathY)}")
    if pathX.dimension != pathY.dimension:
        raise ProcessError(f"路径维数不一致: {pathX.dimension} vs {pathY.dimension}")
    total = 0.0
    for t in range(1, len(pathX)):
        total += float(cost(t, pathX[t], pathY[t]))
    if not np.isfinite(total):
        raise ProcessError("路径成本不是有限值")
    return total
