"""Estimation of the number of latent classes in ordinal response data.

The package pairs a spectral clustering fit with residual-based fit
statistics: walking candidate class counts upward, the statistic of a
correctly sized model collapses toward zero while undersized models stay
visibly misfit. Sequential selectors built on that contrast estimate the
class count, and a seeded Monte Carlo harness scores them on synthetic
grids.
"""

from .errors import DataFormatError, NumericError
from .estimator import FittedModel, clustering_error, fit_sc_lcm
from .experiments import (
    CellConfig,
    ExperimentConfig,
    ExperimentResult,
    Overrides,
    preset_config,
    run_experiment,
    run_threshold_sensitivity,
)
from .gof import (
    CandidateRecord,
    GofTrace,
    SelectConfig,
    StopReason,
    default_k_max,
    evaluate_curve,
    ideal_residual,
    practical_residual,
    ratio_statistic,
    residual_centering,
    select_gof,
    select_rgof,
    select_spec,
    spec_threshold,
    statistic_bound,
    t_statistic,
)
from .linalg import (
    KmeansResult,
    SvdResult,
    kmeans,
    singular_values,
    singular_values_above,
    spectral_norm,
    top_k_svd,
)
from .matio import load_response_csv, save_response_csv
from .model import (
    GenConfig,
    LcmParams,
    ResponseMatrix,
    child_seed,
    expected_response,
    generate_dataset,
    generate_memberships,
    generate_theta,
    response_variances,
    sample_responses,
)

__version__ = "0.1.0"

__all__ = [
    "CandidateRecord",
    "CellConfig",
    "DataFormatError",
    "ExperimentConfig",
    "ExperimentResult",
    "FittedModel",
    "GenConfig",
    "GofTrace",
    "KmeansResult",
    "LcmParams",
    "NumericError",
    "Overrides",
    "ResponseMatrix",
    "SelectConfig",
    "StopReason",
    "SvdResult",
    "child_seed",
    "clustering_error",
    "default_k_max",
    "evaluate_curve",
    "expected_response",
    "fit_sc_lcm",
    "generate_dataset",
    "generate_memberships",
    "generate_theta",
    "ideal_residual",
    "kmeans",
    "load_response_csv",
    "practical_residual",
    "preset_config",
    "ratio_statistic",
    "residual_centering",
    "response_variances",
    "run_experiment",
    "run_threshold_sensitivity",
    "sample_responses",
    "save_response_csv",
    "select_gof",
    "select_rgof",
    "select_spec",
    "singular_values",
    "singular_values_above",
    "spec_threshold",
    "spectral_norm",
    "statistic_bound",
    "t_statistic",
    "top_k_svd",
]
