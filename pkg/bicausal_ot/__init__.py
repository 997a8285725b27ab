"""离散时间随机过程之间的双因果最优传输。"""

from .core.bicausal import (
    BicausalError,
    NodePairValueTable,
    backward_lp_value,
    nested_sinkhorn_value,
)
from .core.discrete_ot import (
    CostMatrix,
    Coupling,
    DiscreteMeasure,
    SinkhornConvergenceError,
    TransportError,
    exact_ot,
    kl_divergence,
    sinkhorn,
    wasserstein_p_1d,
)
from .core.fvi import (
    AdamState,
    FviConfig,
    FviError,
    FviTargetError,
    SeparableValueNet,
    adam_step,
    empirical_bellman_target,
    fit_value_functions,
    smooth_l1,
    value_estimate,
)
from .core.oracle import OracleError, SpdMatrix, exact_value, spd_sqrt
from .core.process import (
    GaussianAR1,
    Path,
    ProcessError,
    ProcessModel,
    SamplerProcess,
    StageCost,
    path_cost,
    sample_path,
    sample_product_paths,
)
from .core.quantization import ScenarioTree, TreeError, build_tree, tree_expectation

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BicausalError",
    "CostMatrix",
    "Coupling",
    "DiscreteMeasure",
    "FviConfig",
    "FviError",
    "FviTargetError",
    "GaussianAR1",
    "NodePairValueTable",
    "OracleError",
    "Path",
    "ProcessError",
    "ProcessModel",
    "SamplerProcess",
    "ScenarioTree",
    "SeparableValueNet",
    "SinkhornConvergenceError",
    "SpdMatrix",
    "StageCost",
    "TransportError",
    "TreeError",
    "adam_step",
    "backward_lp_value",
    "build_tree",
    "empirical_bellman_target",
    "exact_ot",
    "exact_value",
    "fit_value_functions",
    "kl_divergence",
    "nested_sinkhorn_value",
    "path_cost",
    "sample_path",
    "sample_product_paths",
    "sinkhorn",
    "smooth_l1",
    "spd_sqrt",
    "tree_expectation",
    "value_estimate",
    "wasserstein_p_1d",
]
