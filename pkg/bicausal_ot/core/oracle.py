"""Gaussian AR(1) 模型的闭式真值与所需的 SPD 矩阵工具。

    V = T·|x0 − y0|² + T(T+1)/2 · (tr Σx + tr Σy − 2·tr √(√Σx Σy √Σx))

最优适应耦合是同步耦合（公共噪声经 Bures 最优旋转），这里只暴露其值。
"""

from dataclasses import dataclass

import numpy as np

from ..common.log import logger

SYMMETRY_TOL = 1e-12
SEMIDEFINITE_TOL = 1e-10


class OracleError(ValueError):
    """输入矩阵不对称、非半正定或维数不一致。"""


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    """d×d 对称半正定矩阵（对称误差 1e-12，特征值 ≥ -1e-10）。"""

    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.array(np.atleast_2d(self.entries), dtype=float, copy=True)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise OracleError(f"矩阵必须为方阵，实际形状 {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise OracleError("矩阵包含非有限值")
        if np.max(np.abs(entries - entries.T)) > SYMMETRY_TOL:
            raise OracleError("矩阵不对称")
        if np.linalg.eigvalsh(entries).min() < -SEMIDEFINITE_TOL:
            raise OracleError("矩阵不是半正定的")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))


def _as_spd(matrix: SpdMatrix | np.ndarray | float) -> SpdMatrix:
    return matrix if isinstance(matrix, SpdMatrix) else SpdMatrix(np.asarray(matrix, dtype=float))


def spd_sqrt(matrix: SpdMatrix | np.ndarray) -> SpdMatrix:
    """对称特征分解求主平方根，负特征值截断为 0。"""
    matrix = _as_spd(matrix)
    eigenvalues, eigenvectors = np.linalg.eigh(matrix.entries)
    root = (eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ eigenvectors.T
    # 消除舍入造成的微小不对称
    return SpdMatrix(0.5 * (root + root.T))


def bures_trace_term(sigma_x: SpdMatrix | np.ndarray, sigma_y: SpdMatrix | np.ndarray) -> float:
    """tr Σx + tr Σy − 2·tr √(√Σx Σy √Σx)，结果截断为非负。"""
    sigma_x = _as_spd(sigma_x)
    sigma_y = _as_spd(sigma_y)
    if sigma_x.dimension != sigma_y.dimension:
        raise OracleError(f"协方差维数不一致: {sigma_x.dimension} vs {sigma_y.dimension}")
    root_x = spd_sqrt(sigma_x).entries
    middle = root_x @ sigma_y.entries @ root_x
    cross = spd_sqrt(0.5 * (middle + middle.T)).trace
    return max(sigma_x.trace + sigma_y.trace - 2.0 * cross, 0.0)


def exact_value(
    x0: np.ndarray | float,
    y0: np.ndarray | float,
    sigma_x: SpdMatrix | np.ndarray | float,
    sigma_y: SpdMatrix | np.ndarray | float,
    T: int,
) -> float:
    """二次成本下两个 Gaussian AR(1) 过程之间的双因果 OT 闭式值。

    Args:
        x0, y0: 初始状态（d 维）。
        sigma_x, sigma_y: 增量协方差。
        T: 期数，≥ 1。

    Raises:
        OracleError: 维数不一致、T < 1 或矩阵不合法。
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    sigma_x = _as_spd(sigma_x)
    sigma_y = _as_spd(sigma_y)
    if int(T) < 1:
        raise OracleError(f"期数 T 必须 ≥ 1，实际为 {T}")
    d = x0.shape[0]
    if y0.shape != (d,) or sigma_x.dimension != d or sigma_y.dimension != d:
        raise OracleError(
            f"维数不一致: x0={x0.shape}, y0={y0.shape}, "
            f"Σx={sigma_x.entries.shape}, Σy={sigma_y.entries.shape}"
        )
    T = int(T)
    drift = float(np.sum((x0 - y0) ** 2))
    value = T * drift + 0.5 * T * (T + 1) * bures_trace_term(sigma_x, sigma_y)
    logger.debug(f"[Oracle] d={d} T={T} 真值={value:.12g}")
    return value
