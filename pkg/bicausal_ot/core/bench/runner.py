"""实验编排：对每个期数跑 R 次带种子的重复实验，汇总均值、样本标准差与耗时。

重复实验放进 `asyncio.to_thread`，由 `Semaphore(workers)` 限制并发，
`asyncio.gather` 保证结果按重复序号排列。
"""

import asyncio
import time
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from ...common.log import log_policy, logger
from ...common.rng import STREAM_TREE_X, STREAM_TREE_Y, make_rng, repetition_seed
from ...common.text_tools import format_params
from ..bicausal import backward_lp_value, nested_sinkhorn_value
from ..fvi import fit_value_functions
from ..oracle import exact_value
from ..process import StageCost
from ..quantization import build_tree
from .config import ConfigError, ExperimentConfig
from .report import ExperimentReport, ReportRow


@dataclass(frozen=True)
class RepetitionResult:
    index: int
    estimate: float
    runtime_s: float
    extras: dict[str, float] = field(default_factory=dict)


def _build_trees(config: ExperimentConfig, horizon: int, seed: np.random.SeedSequence):
    modelX, modelY = config.models(horizon)
    treeX = build_tree(
        modelX, horizon, config.S, make_rng(seed, STREAM_TREE_X), config.branching, config.partition
    )
    treeY = build_tree(
        modelY, horizon, config.S, make_rng(seed, STREAM_TREE_Y), config.branching, config.partition
    )
    return treeX, treeY


def run_repetition(config: ExperimentConfig, horizon: int, index: int) -> RepetitionResult:
    """单次重复实验；计时包含数据采样与树构造。"""
    seed = repetition_seed(config.seed, index)
    cost = StageCost.squared()
    started = time.monotonic()
    extras: dict[str, float] = {}
    if config.method == "tree-lp":
        treeX, treeY = _build_trees(config, horizon, seed)
        estimate = backward_lp_value(treeX, treeY, cost).value
    elif config.method == "adapted-sinkhorn":
        treeX, treeY = _build_trees(config, horizon, seed)
        result = nested_sinkhorn_value(
            treeX, treeY, cost, config.epsilon_for(horizon), config.tol, config.max_iter
        )
        estimate = result.value
        extras["linear"] = result.linear_value
    elif config.method == "fvi":
        modelX, modelY = config.models(horizon)
        result = fit_value_functions(modelX, modelY, cost, config.fvi_config(horizon, seed))
        estimate = result.v0_estimate
        extras["clamped"] = float(result.diagnostics.clamped)
    else:
        raise ConfigError(f"方法 {config.method!r} 不需要重复实验", "method")
    runtime = time.monotonic() - started
    logger.debug(
        f"[Bench] {config.method} T={horizon} rep={index} 估计={estimate:.6g} 耗时={runtime:.3f}s"
    )
    return RepetitionResult(index=index, estimate=float(estimate), runtime_s=runtime, extras=extras)


async def _gather_bounded(jobs: list[Callable[[], RepetitionResult]], workers: int) -> list[RepetitionResult]:
    semaphore = asyncio.Semaphore(max(1, workers))

    async def run(job: Callable[[], RepetitionResult]) -> RepetitionResult:
        async with semaphore:
            return await asyncio.to_thread(job)

    return list(await asyncio.gather(*(run(job) for job in jobs)))


def _summarize(
    config: ExperimentConfig, horizon: int, actual: float, results: list[RepetitionResult]
) -> ReportRow:
    estimates = np.array([r.estimate for r in results])
    runtimes = np.array([r.runtime_s for r in results])
    sd = float(estimates.std(ddof=1)) if estimates.size > 1 else 0.0
    params = config.method_params(horizon)
    if config.method == "adapted-sinkhorn":
        params["linear_mean"] = float(np.mean([r.extras["linear"] for r in results]))
    if config.method == "fvi":
        params["clamped"] = int(sum(r.extras["clamped"] for r in results))
    return ReportRow(
        method=config.method,
        horizon=horizon,
        dimension=config.d,
        actual=actual,
        est_mean=float(estimates.mean()),
        est_sd=sd,
        avg_runtime_s=float(runtimes.mean()),
        reps=len(results),
        seed=config.seed,
        params=format_params(params),
    )


async def run_experiment_async(config: ExperimentConfig) -> ExperimentReport:
    if config.is_tree_method and config.d != 1:
        raise ConfigError("tree methods require d=1", "d")
    report = ExperimentReport()
    for horizon in config.horizons:
        started = time.monotonic()
        actual = exact_value(config.x0, config.y0, config.sigma_x, config.sigma_y, horizon)
        if config.method == "oracle":
            row = ReportRow(
                method="oracle",
                horizon=horizon,
                dimension=config.d,
                actual=actual,
                est_mean=actual,
                est_sd=0.0,
                avg_runtime_s=time.monotonic() - started,
                reps=1,
                seed=config.seed,
            )
        else:
            jobs = [
                (lambda index=index: run_repetition(config, horizon, index))
                for index in range(config.reps)
            ]
            results = await _gather_bounded(jobs, config.workers)
            row = _summarize(config, horizon, actual, results)
        report.append(row)
        log_policy.log_summary(
            tag="Bench",
            label=(
                f"{row.method} T={horizon} 真值={actual:.6g} 估计={row.est_mean:.6g} "
                f"(SD {row.est_sd:.3g}) 平均耗时={row.avg_runtime_s:.3f}s R={row.reps}"
            ),
        )
    return report


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """对配置中的每个期数运行实验并返回报告。

    Raises:
        ConfigError: 方法与模型不兼容（在任何运行开始之前）。
    """
    return asyncio.run(run_experiment_async(config))
