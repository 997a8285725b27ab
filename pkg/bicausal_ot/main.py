"""命令行入口：`bicausal-ot <oracle|tree-lp|adapted-sinkhorn|fvi|bench> [选项]`。

退出码：0 成功；2 配置或输入校验失败；1 求解失败或 I/O 错误。
"""

import argparse
import sys

from rich.console import Console
from rich.table import Table

from .common.log import logger, setup_logging
from .common.storage import read_text
from .core.bench import (
    METHODS,
    ConfigError,
    ExperimentReport,
    dumps_csv,
    parse_config,
    run_experiment,
    write_csv,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2

SUBCOMMANDS = (*METHODS, "bench")
SUBCOMMAND_HELP = {
    "oracle": "Gaussian AR(1) 闭式真值",
    "tree-lp": "二叉情景树 + 逐节点精确 OT 逆向归纳",
    "adapted-sinkhorn": "二叉情景树 + 嵌套熵正则逆向归纳",
    "fvi": "拟合值迭代（共享可分离网络）",
    "bench": "按配置中的 method 对期数列表做扫描",
}


def _parse_assignment(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"应为 key=value，实际为 {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bicausal-ot",
        description="离散时间随机过程之间的双因果最优传输：树方法、嵌套 Sinkhorn 与拟合值迭代。",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name, help=SUBCOMMAND_HELP[name])
        sub.add_argument("--config", help="key = value 配置文件路径")
        sub.add_argument("--out", help="CSV 输出路径（缺省时写到标准输出）")
        sub.add_argument("--seed", type=int, help="主种子")
        sub.add_argument("--reps", type=int, help="重复次数 R")
        sub.add_argument("--horizons", help="期数列表，例如 1-8 或 1,2,10")
        sub.add_argument("--workers", type=int, help="并发重复实验数")
        sub.add_argument(
            "--set",
            dest="assignments",
            action="append",
            default=[],
            type=_parse_assignment,
            metavar="KEY=VALUE",
            help="覆盖任意配置键，可重复",
        )
        sub.add_argument("--verbose", action="store_true", help="在 stderr 输出逐层/逐期诊断")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, object]:
    overrides: dict[str, object] = dict(args.assignments)
    if args.command != "bench":
        overrides["method"] = args.command
    for key, value in (
        ("seed", args.seed),
        ("R", args.reps),
        ("horizons", args.horizons),
        ("workers", args.workers),
        ("out", args.out),
    ):
        if value is not None:
            overrides[key] = value
    return overrides


def render_summary(report: ExperimentReport, console: Console) -> None:
    table = Table(title="bicausal OT")
    for column in ("method", "T", "d", "actual", "estimate (SD)", "rel. err", "runtime s", "R"):
        table.add_column(column, justify="right" if column != "method" else "left")
    for row in report:
        rel = row.relative_error
        table.add_row(
            row.method,
            str(row.horizon),
            str(row.dimension),
            "" if row.actual is None else f"{row.actual:.6g}",
            f"{row.est_mean:.6g} ({row.est_sd:.3g})",
            "" if rel is None else f"{100 * rel:.1f}%",
            f"{row.avg_runtime_s:.3f}",
            str(row.reps),
        )
    console.print(table)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        text = read_text(args.config) if args.config else ""
        config = parse_config(text, _overrides(args))
        report = run_experiment(config)
        if config.out:
            write_csv(report, config.out)
        else:
            sys.stdout.write(dumps_csv(report))
        render_summary(report, Console(stderr=True))
    except ConfigError as exc:
        logger.error(f"[CLI] 配置错误: {exc}")
        return EXIT_INVALID
    except ValueError as exc:
        logger.error(f"[CLI] 输入校验失败: {exc}")
        return EXIT_INVALID
    except (RuntimeError, OSError) as exc:
        logger.error(f"[CLI] 运行失败: {exc}")
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
