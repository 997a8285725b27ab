"""共享日志对象。

各模块统一 `from ..common.log import logger`，消息使用 `[组件]` 前缀，
日志默认输出到 stderr，保证 stdout 可以直接用于管道。
"""

import logging
from collections.abc import Callable

from rich.console import Console
from rich.logging import RichHandler

LOGGER_NAME = "bicausal_ot"

logger = logging.getLogger(LOGGER_NAME)
logger.addHandler(logging.NullHandler())


def setup_logging(verbose: bool = False) -> None:
    """为 CLI 安装 rich 控制台处理器。

    重复调用只会替换已安装的 RichHandler，不会叠加输出。

    Args:
        verbose: True 时输出 DEBUG 级别（包括 FVI 每个 t 的损失）。
    """
    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)

    handler = RichHandler(
        console=Console(stderr=True),
        show_path=False,
        rich_tracebacks=False,
        markup=False,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    logger.propagate = False


class VerboseLogPolicy:
    """根据 verbose 开关决定是否输出训练/迭代过程的诊断日志。

    Args:
        verbose_enabled: 返回当前是否启用详细日志的可调用对象。
    """

    def __init__(self, verbose_enabled: Callable[[], bool]) -> None:
        self._verbose_enabled = verbose_enabled

    def log_fvi_step(self, *, t: int, horizon_to_go: int, losses: list[float]) -> None:
        """FVI 在时刻 t 完成 G 步梯度下降后的损失曲线摘要（verbose 下才输出）。

        Args:
            t: 当前时刻。
            horizon_to_go: 剩余期数 T - t。
            losses: 每步 minibatch 的平滑 L1 损失。
        """
        if not self._verbose_enabled() or not losses:
            return
        logger.info(
            f"[FVI] t={t} h={horizon_to_go} steps={len(losses)} "
            f"loss_first={losses[0]:.6g} loss_last={losses[-1]:.6g} "
            f"loss_min={min(losses):.6g}"
        )

    def log_depth_done(self, *, tag: str, depth: int, pairs: int, duration: float) -> None:
        """树上逆向归纳完成一层（verbose 下才输出）。

        Args:
            tag: 日志组件标签，例如 "TreeLP"。
            depth: 刚完成的深度。
            pairs: 该层节点对数量。
            duration: 耗时（秒）。
        """
        if not self._verbose_enabled():
            return
        logger.info(f"[{tag}] depth={depth} pairs={pairs} duration={duration:.3f}s")

    def log_summary(self, *, tag: str, label: str) -> None:
        """运行摘要（始终输出）。"""
        logger.info(f"[{tag}] {label}")


def is_verbose() -> bool:
    """当前 logger 是否处于 DEBUG 级别。"""
    return logger.isEnabledFor(logging.DEBUG)


log_policy = VerboseLogPolicy(is_verbose)
