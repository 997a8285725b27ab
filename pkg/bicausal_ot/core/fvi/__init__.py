from .network import SeparableValueNet, smooth_l1
from .optim import AdamState, adam_step
from .solver import (
    FviConfig,
    FviDiagnostics,
    FviError,
    FviResult,
    FviStepDiagnostics,
    FviTargetError,
    empirical_bellman_target,
    fit_value_functions,
    value_estimate,
)

__all__ = [
    "AdamState",
    "FviConfig",
    "FviDiagnostics",
    "FviError",
    "FviResult",
    "FviStepDiagnostics",
    "FviTargetError",
    "SeparableValueNet",
    "adam_step",
    "empirical_bellman_target",
    "fit_value_functions",
    "smooth_l1",
    "value_estimate",
]
