from .config import (
    DEFAULT_EXPERIMENT_CONFIG,
    EPSILON_BY_HORIZON,
    GRADIENT_STEPS_BY_HORIZON,
    METHODS,
    ConfigError,
    ExperimentConfig,
    parse_config,
)
from .report import (
    CSV_HEADER,
    ExperimentReport,
    ReportRow,
    ReportWriteError,
    dumps_csv,
    loads_csv,
    read_csv,
    write_csv,
)
from .runner import RepetitionResult, run_experiment, run_experiment_async, run_repetition

__all__ = [
    "CSV_HEADER",
    "DEFAULT_EXPERIMENT_CONFIG",
    "EPSILON_BY_HORIZON",
    "GRADIENT_STEPS_BY_HORIZON",
    "METHODS",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentReport",
    "RepetitionResult",
    "ReportRow",
    "ReportWriteError",
    "dumps_csv",
    "loads_csv",
    "parse_config",
    "read_csv",
    "run_experiment",
    "run_experiment_async",
    "run_repetition",
    "write_csv",
]
