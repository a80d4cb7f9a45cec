"""Tree-structured partition estimates of mutual information and tests of independence."""

from .baselines import GridSpec, baseline_decide
from .harness import (
    CENSORED,
    detection_times,
    heuristic_w,
    sampling_complexity,
    significance_estimate,
    size_grid,
    tradeoff_sweep,
)
from .independence import Schedule, decide_independence, estimate_mi, fit_tsp, schedule_at
from .infostat import quantized_log_likelihood, restricted_divergence
from .models import ModelConfig, gaussian_mi, sample, sigma_for_target_mi
from .partition import Dataset, TspTree, grow_full_tree
from .pruner import embedded_family, select_regularized
from .regularizer import epsilon_c, penalty_r

__version__ = "0.1.0"

__all__ = [
    "CENSORED",
    "Dataset",
    "GridSpec",
    "ModelConfig",
    "Schedule",
    "TspTree",
    "baseline_decide",
    "decide_independence",
    "detection_times",
    "embedded_family",
    "epsilon_c",
    "estimate_mi",
    "fit_tsp",
    "gaussian_mi",
    "grow_full_tree",
    "heuristic_w",
    "penalty_r",
    "quantized_log_likelihood",
    "restricted_divergence",
    "sample",
    "sampling_complexity",
    "schedule_at",
    "select_regularized",
    "sigma_for_target_mi",
    "significance_estimate",
    "size_grid",
    "tradeoff_sweep",
    "__version__",
]
