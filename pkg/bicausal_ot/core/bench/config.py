"""扁平 `key = value` 实验配置的解析与校验。

解析流程与插件配置归一化一致：复制默认字典、叠加用户键，
再逐键归一化，最后冻结为 `ExperimentConfig`。任何错误都指出出错的键。
"""

from dataclasses import dataclass
from typing import Any

import numpy as np

from ...common.log import logger
from ...common.text_tools import (
    TextFormatError,
    format_params,
    lookup_schedule,
    parse_float_list,
    parse_int_list,
    parse_matrix,
    parse_schedule,
    split_key_values,
    to_bool,
)
from ..bicausal import MAX_TREE_HORIZON
from ..fvi import FviConfig
from ..process import GaussianAR1, ProcessError, validate_covariance
from ..quantization import PARTITION_RULES

METHODS = ("oracle", "tree-lp", "adapted-sinkhorn", "fvi")
TREE_METHODS = frozenset({"tree-lp", "adapted-sinkhorn"})
TARGET_MODES = ("exact", "entropic")

# 分段表：从期数 T 起使用对应取值。
EPSILON_BY_HORIZON = "1:0.1,6:0.2,7:0.4,8:0.6,9:0.8,10:1.0"
GRADIENT_STEPS_BY_HORIZON = "1:50,6:40,7:30,8:20"

DEFAULT_EXPERIMENT_CONFIG: dict[str, Any] = {
    "method": "oracle",
    "d": "1",
    "T": "1",
    "horizons": "",
    "sigma_x": "1.0",
    "sigma_y": "0.25",
    "x0": "1.0",
    "y0": "2.0",
    "S": "1000",
    "branching": "2",
    "partition": "mean",
    "epsilon": "0.1",
    "epsilon_by_T": "",
    "tol": "1e-4",
    "max_iter": "10000",
    "N": "2000",
    "B": "50",
    "G": "50",
    "G_by_T": "",
    "batch": "128",
    "lr": "0.01",
    "tau": "1.0",
    "clip": "auto",
    "target": "exact",
    "target_epsilon": "",
    "R": "10",
    "seed": "0",
    "workers": "1",
    "out": "",
}
KEY_ALIASES = {"reps": "R"}


class ConfigError(ValueError):
    """配置非法；`key` 为出错的配置键（文本格式错误时为 None）。"""

    def __init__(self, message: str, key: str | None = None) -> None:
        super().__init__(f"配置项 {key}: {message}" if key else message)
        self.key = key


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """经过完整校验的实验配置。"""

    method: str
    d: int
    horizons: tuple[int, ...]
    sigma_x: np.ndarray
    sigma_y: np.ndarray
    x0: np.ndarray
    y0: np.ndarray
    S: int = 1000
    branching: int = 2
    partition: str = "mean"
    epsilon: float = 0.1
    epsilon_by_T: tuple[tuple[int, float], ...] = ()
    tol: float = 1e-4
    max_iter: int = 10000
    N: int = 2000
    B: int = 50
    G: int = 50
    G_by_T: tuple[tuple[int, float], ...] = ()
    batch: int = 128
    lr: float = 0.01
    tau: float = 1.0
    clip: bool = True
    target: str = "exact"
    target_epsilon: float | None = None
    reps: int = 10
    seed: int = 0
    workers: int = 1
    out: str | None = None

    @property
    def T(self) -> int:
        return self.horizons[0]

    @property
    def is_tree_method(self) -> bool:
        return self.method in TREE_METHODS

    def epsilon_for(self, horizon: int) -> float:
        scheduled = lookup_schedule(list(self.epsilon_by_T), horizon)
        return self.epsilon if scheduled is None else float(scheduled)

    def gradient_steps_for(self, horizon: int) -> int:
        scheduled = lookup_schedule(list(self.G_by_T), horizon)
        return self.G if scheduled is None else int(scheduled)

    def models(self, horizon: int) -> tuple[GaussianAR1, GaussianAR1]:
        return (
            GaussianAR1(self.x0, self.sigma_x, horizon),
            GaussianAR1(self.y0, self.sigma_y, horizon),
        )

    def fvi_config(self, horizon: int, seed: int | np.random.SeedSequence) -> FviConfig:
        return FviConfig(
            T=horizon,
            d=self.d,
            N=self.N,
            B=self.B,
            G=self.gradient_steps_for(horizon),
            batch=self.batch,
            lr=self.lr,
            clip=self.clip,
            tau=self.tau,
            target=self.target,
            target_epsilon=self.target_epsilon,
            sinkhorn_tol=self.tol,
            sinkhorn_max_iter=self.max_iter,
            seed=seed,
        )

    def method_params(self, horizon: int) -> dict[str, object]:
        """写入报告 `params` 列的方法参数（不含派生统计量）。"""
        if self.method == "oracle":
            return {}
        if self.method == "tree-lp":
            return {"S": self.S, "branching": self.branching, "partition": self.partition}
        if self.method == "adapted-sinkhorn":
            return {
                "S": self.S,
                "branching": self.branching,
                "partition": self.partition,
                "epsilon": self.epsilon_for(horizon),
                "tol": self.tol,
            }
        params: dict[str, object] = {
            "N": self.N,
            "B": self.B,
            "G": self.gradient_steps_for(horizon),
            "batch": self.batch,
            "lr": self.lr,
            "tau": self.tau,
            "clip": "on" if self.clip else "off",
            "target": self.target,
            "clamp": "max0",
        }
        if self.target == "entropic":
            params["target_epsilon"] = self.target_epsilon
        return params

    def describe(self, horizon: int) -> str:
        return format_params(self.method_params(horizon))


def _require(condition: bool, key: str, message: str) -> None:
    if not condition:
        raise ConfigError(message, key)


def _to_int(raw: Any, key: str) -> int:
    try:
        text = str(raw).strip()
        value = float(text)
        if not value.is_integer():
            raise ValueError
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"应为整数，实际为 {raw!r}", key) from None


def _to_float(raw: Any, key: str) -> float:
    try:
        value = float(str(raw).strip())
    except (TypeError, ValueError):
        raise ConfigError(f"应为实数，实际为 {raw!r}", key) from None
    if not np.isfinite(value):
        raise ConfigError(f"应为有限实数，实际为 {raw!r}", key)
    return value


def _to_vector(raw: Any, key: str, d: int) -> np.ndarray:
    try:
        values = parse_float_list(raw)
    except ValueError as exc:
        raise ConfigError(str(exc), key) from None
    if len(values) == 1:
        values = values * d
    _require(len(values) == d, key, f"长度 {len(values)} 与维数 d={d} 不一致")
    return np.array(values, dtype=float)


def _to_covariance(raw: Any, key: str, d: int) -> np.ndarray:
    """标量 ⇒ 标量·I；逗号列表 ⇒ 对角阵；`;` 分隔行 ⇒ 完整矩阵。"""
    text = str(raw).strip()
    try:
        if ";" in text:
            matrix = np.array(parse_matrix(text), dtype=float)
        else:
            values = parse_float_list(text)
            matrix = values[0] * np.eye(d) if len(values) == 1 else np.diag(values)
    except ValueError as exc:
        raise ConfigError(str(exc), key) from None
    _require(matrix.shape == (d, d), key, f"矩阵形状 {matrix.shape} 与维数 d={d} 不一致")
    try:
        return validate_covariance(matrix, d)
    except ProcessError as exc:
        raise ConfigError(str(exc), key) from None


def _to_schedule(raw: Any, key: str) -> tuple[tuple[int, float], ...]:
    text = str(raw).strip()
    if not text:
        return ()
    try:
        return tuple(parse_schedule(text))
    except ValueError as exc:
        raise ConfigError(str(exc), key) from None


def _collect(text: str, overrides: dict[str, Any] | None) -> dict[str, Any]:
    cfg = dict(DEFAULT_EXPERIMENT_CONFIG)
    try:
        pairs = split_key_values(text)
    except TextFormatError as exc:
        raise ConfigError(str(exc)) from None
    for key, value, _line_no in pairs:
        key = KEY_ALIASES.get(key, key)
        if key not in DEFAULT_EXPERIMENT_CONFIG:
            raise ConfigError("未知的配置键", key)
        cfg[key] = value
    for key, value in (overrides or {}).items():
        key = KEY_ALIASES.get(key, key)
        if key not in DEFAULT_EXPERIMENT_CONFIG:
            raise ConfigError("未知的配置键", key)
        if value is not None:
            cfg[key] = value
    return cfg


def parse_config(text: str, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """解析并校验实验配置文本。

    Args:
        text: `key = value` 文本，允许一行多个 `key=value`、`#` 注释。
        overrides: 命令行覆盖项，优先级高于文本。

    Raises:
        ConfigError: 未知键、类型错误或取值越界，异常带有出错的键。
    """
    cfg = _collect(text, overrides)

    method = str(cfg["method"]).strip()
    _require(method in METHODS, "method", f"应为 {', '.join(METHODS)} 之一，实际为 {method!r}")
    d = _to_int(cfg["d"], "d")
    _require(d >= 1, "d", f"必须 ≥ 1，实际为 {d}")
    if method in TREE_METHODS:
        _require(d == 1, "d", "tree methods require d=1")

    T = _to_int(cfg["T"], "T")
    _require(T >= 1, "T", f"必须 ≥ 1，实际为 {T}")
    horizons_text = str(cfg["horizons"]).strip()
    if horizons_text:
        try:
            horizons = tuple(parse_int_list(horizons_text))
        except ValueError as exc:
            raise ConfigError(str(exc), "horizons") from None
    else:
        horizons = (T,)
    _require(all(h >= 1 for h in horizons), "horizons", f"期数必须 ≥ 1: {horizons}")
    if method in TREE_METHODS:
        _require(
            max(horizons) <= MAX_TREE_HORIZON,
            "horizons" if horizons_text else "T",
            f"树方法的期数上限为 {MAX_TREE_HORIZON}，实际为 {max(horizons)}",
        )

    sigma_x = _to_covariance(cfg["sigma_x"], "sigma_x", d)
    sigma_y = _to_covariance(cfg["sigma_y"], "sigma_y", d)
    x0 = _to_vector(cfg["x0"], "x0", d)
    y0 = _to_vector(cfg["y0"], "y0", d)

    S = _to_int(cfg["S"], "S")
    branching = _to_int(cfg["branching"], "branching")
    partition = str(cfg["partition"]).strip()
    _require(S >= 2, "S", f"必须 ≥ 2，实际为 {S}")
    _require(branching >= 2, "branching", f"必须 ≥ 2，实际为 {branching}")
    _require(S >= branching, "S", f"必须 ≥ branching={branching}")
    _require(partition in PARTITION_RULES, "partition", f"应为 {', '.join(PARTITION_RULES)} 之一")
    _require(
        branching == 2 or partition == "quantile",
        "partition",
        f"{partition!r} 只支持二叉树，多叉请使用 quantile",
    )

    epsilon = _to_float(cfg["epsilon"], "epsilon")
    _require(epsilon > 0, "epsilon", f"必须为正，实际为 {epsilon}")
    epsilon_by_T = _to_schedule(cfg["epsilon_by_T"], "epsilon_by_T")
    _require(all(v > 0 for _, v in epsilon_by_T), "epsilon_by_T", "分段 ε 必须为正")
    tol = _to_float(cfg["tol"], "tol")
    _require(tol > 0, "tol", f"必须为正，实际为 {tol}")
    max_iter = _to_int(cfg["max_iter"], "max_iter")
    _require(max_iter >= 1, "max_iter", f"必须 ≥ 1，实际为 {max_iter}")

    N = _to_int(cfg["N"], "N")
    B = _to_int(cfg["B"], "B")
    G = _to_int(cfg["G"], "G")
    batch = _to_int(cfg["batch"], "batch")
    _require(B >= 1, "B", f"必须 ≥ 1，实际为 {B}")
    _require(G >= 1, "G", f"必须 ≥ 1，实际为 {G}")
    _require(batch >= 1, "batch", f"必须 ≥ 1，实际为 {batch}")
    _require(N >= batch, "N", f"必须 ≥ batch={batch}，实际为 {N}")
    G_by_T = _to_schedule(cfg["G_by_T"], "G_by_T")
    _require(
        all(v >= 1 and float(v).is_integer() for _, v in G_by_T),
        "G_by_T",
        "分段梯度步数必须是正整数",
    )
    lr = _to_float(cfg["lr"], "lr")
    tau = _to_float(cfg["tau"], "tau")
    _require(lr > 0, "lr", f"必须为正，实际为 {lr}")
    _require(tau > 0, "tau", f"必须为正，实际为 {tau}")

    clip_text = str(cfg["clip"]).strip().lower()
    if clip_text == "auto":
        clip = d == 1
    else:
        try:
            clip = to_bool(clip_text)
        except ValueError as exc:
            raise ConfigError(str(exc), "clip") from None

    target = str(cfg["target"]).strip()
    _require(target in TARGET_MODES, "target", f"应为 exact 或 entropic，实际为 {target!r}")
    target_epsilon_text = str(cfg["target_epsilon"]).strip()
    target_epsilon = _to_float(target_epsilon_text, "target_epsilon") if target_epsilon_text else None
    if target == "entropic":
        _require(
            target_epsilon is not None and target_epsilon > 0,
            "target_epsilon",
            "entropic 目标模式需要正的 target_epsilon",
        )

    reps = _to_int(cfg["R"], "R")
    _require(reps >= 1, "R", f"必须 ≥ 1，实际为 {reps}")
    seed = _to_int(cfg["seed"], "seed")
    _require(seed >= 0, "seed", f"必须 ≥ 0，实际为 {seed}")
    workers = _to_int(cfg["workers"], "workers")
    _require(workers >= 1, "workers", f"必须 ≥ 1，实际为 {workers}")
    out = str(cfg["out"]).strip() or None

    config = ExperimentConfig(
        method=method,
        d=d,
        horizons=horizons,
        sigma_x=sigma_x,
        sigma_y=sigma_y,
        x0=x0,
        y0=y0,
        S=S,
        branching=branching,
        partition=partition,
        epsilon=epsilon,
        epsilon_by_T=epsilon_by_T,
        tol=tol,
        max_iter=max_iter,
        N=N,
        B=B,
        G=G,
        G_by_T=G_by_T,
        batch=batch,
        lr=lr,
        tau=tau,
        clip=clip,
        target=target,
        target_epsilon=target_epsilon,
        reps=reps,
        seed=seed,
        workers=workers,
        out=out,
    )
    logger.debug(f"[Config] method={method} d={d} horizons={list(horizons)} R={reps} seed={seed}")
    return config
