"""Bag-of-little-bootstraps confidence intervals for kernel causal estimators.

Three estimators plug into :func:`run_cblb`: kernel minimax balancing
weights (:class:`MinimaxPlugin`), cross-fitted DML with SVM nuisances
(:class:`DMLPlugin`) and kernel augmented outcome-weighted learning
(:class:`AOLPlugin`).
"""

from .aol import AOLFit, AOLPlugin, fit_aol, huberized_hinge
from .cblb import (
    BagFailure,
    ReplicateSet,
    empirical_quantile,
    normality_check,
    partition,
    replicate,
    run_cblb,
    run_full_bootstrap,
)
from .core import (
    CBLBConfig,
    ConfigInfeasible,
    Contribution,
    Dataset,
    IntervalResult,
    to_binary_coding,
    to_sign_coding,
    validate_dataset,
)
from .dgp import ATE_TRUTH, OPTIMAL_VALUE, generate_ate, generate_policy, true_optimal_rule
from .dml import DMLConfig, DMLPlugin
from .kernels import KernelSpec, gram, gram_cross, kernel_eval
from .minimax import MinimaxPlugin, imbalance_sq, solve_weights
from .numerics import RngStream, lbfgs_minimize
from .timing import QuadraticCostPlugin, benchmark, scaling_fit

__version__ = "0.1.0"

__all__ = [
    "AOLFit", "AOLPlugin", "fit_aol", "huberized_hinge",
    "BagFailure", "ReplicateSet", "empirical_quantile", "normality_check", "partition",
    "replicate", "run_cblb", "run_full_bootstrap",
    "CBLBConfig", "ConfigInfeasible", "Contribution", "Dataset", "IntervalResult",
    "to_binary_coding", "to_sign_coding", "validate_dataset",
    "ATE_TRUTH", "OPTIMAL_VALUE", "generate_ate", "generate_policy", "true_optimal_rule",
    "DMLConfig", "DMLPlugin",
    "KernelSpec", "gram", "gram_cross", "kernel_eval",
    "MinimaxPlugin", "imbalance_sq", "solve_weights",
    "RngStream", "lbfgs_minimize",
    "QuadraticCostPlugin", "benchmark", "scaling_fit",
]
