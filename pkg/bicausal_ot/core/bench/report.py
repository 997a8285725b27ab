import csv
import io
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path

from ...common.log import logger
from ...common.storage import StorageError, atomic_write_text, read_text

CSV_COLUMNS = (
    "method",
    "horizon",
    "dimension",
    "actual",
    "est_mean",
    "est_sd",
    "avg_runtime_s",
    "reps",
    "seed",
    "params",
)
CSV_HEADER = ",".join(CSV_COLUMNS)


class ReportWriteError(OSError):
    """报告读写失败；`path` 为目标文件。"""

    def __init__(self, message: str, path: Path) -> None:
        super().__init__(message)
        self.path = path


@dataclass(frozen=True)
class ReportRow:
    """一个 (方法, 期数) 单元格的汇总。"""

    method: str
    horizon: int
    dimension: int
    actual: float | None
    est_mean: float
    est_sd: float
    avg_runtime_s: float
    reps: int
    seed: int
    params: str = ""

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValueError(f"reps 必须 ≥ 1，实际为 {self.reps}")
        if self.est_sd < 0:
            raise ValueError(f"est_sd 不能为负，实际为 {self.est_sd}")

    @property
    def relative_error(self) -> float | None:
        if not self.actual:
            return None
        return abs(self.est_mean - self.actual) / abs(self.actual)


@dataclass
class ExperimentReport:
    rows: list[ReportRow] = field(default_factory=list)

    def append(self, row: ReportRow) -> None:
        self.rows.append(row)

    def extend(self, rows: Iterable[ReportRow]) -> None:
        self.rows.extend(rows)

    def __iter__(self) -> Iterator[ReportRow]:
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6g}"


def dumps_csv(report: ExperimentReport) -> str:
    """报告的 CSV 文本：固定表头，浮点数保留 6 位有效数字，LF 换行。"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report:
        writer.writerow(
            [
                row.method,
                row.horizon,
                row.dimension,
                _fmt(row.actual),
                _fmt(row.est_mean),
                _fmt(row.est_sd),
                _fmt(row.avg_runtime_s),
                row.reps,
                row.seed,
                row.params,
            ]
        )
    return buffer.getvalue()


def write_csv(report: ExperimentReport, path: str | Path) -> Path:
    """原子写入 CSV 报告。

    Raises:
        ReportWriteError: 任何 I/O 失败，带目标路径。
    """
    try:
        target = atomic_write_text(path, dumps_csv(report))
    except StorageError as exc:
        raise ReportWriteError(str(exc), exc.path) from exc
    logger.info(f"[Report] 已写入 {len(report)} 行结果: {target}")
    return target


def _parse_float(text: str) -> float | None:
    return float(text) if text else None


def loads_csv(text: str) -> ExperimentReport:
    lines = text.splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("CSV 表头不匹配")
    report = ExperimentReport()
    for record in csv.DictReader(io.StringIO(text)):
        report.append(
            ReportRow(
                method=record["method"],
                horizon=int(record["horizon"]),
                dimension=int(record["dimension"]),
                actual=_parse_float(record["actual"]),
                est_mean=float(record["est_mean"]),
                est_sd=float(record["est_sd"]),
                avg_runtime_s=float(record["avg_runtime_s"]),
                reps=int(record["reps"]),
                seed=int(record["seed"]),
                params=record["params"],
            )
        )
    return report


def read_csv(path: str | Path) -> ExperimentReport:
    try:
        return loads_csv(read_text(path))
    except StorageError as exc:
        raise ReportWriteError(str(exc), exc.path) from exc
