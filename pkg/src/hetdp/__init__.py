"""Differentially private measures of statistical heterogeneity.

The package computes dispersion, Cochran's Q and I-squared over datasets of
bounded vectors, releases them under (epsilon, delta)-differential privacy
with classical or analytic Gaussian noise, and verifies the closed-form error
analysis (empirical vs theoretical vs centralized mean squared error,
confidence intervals) that accompanies the estimators.
"""

from hetdp.datasets import (
    CANONICAL_PROFILES,
    DataFormat,
    DatasetDescriptor,
    DatasetFormatError,
    HeterogeneityProfile,
    LabelScheme,
    SampleCapacityError,
    load_cifar,
    load_dataset,
    load_idx,
    stratified_sample,
    synthetic_dataset,
    write_cifar,
    write_idx,
)
from hetdp.errors import (
    ErrorReport,
    ci_dispersion,
    ci_i_squared,
    ci_q,
    derive_seed,
    emse,
    error_report,
    tmse_dispersion,
    tmse_i_squared,
    tmse_q,
)
from hetdp.estimators import (
    DegenerateStatisticError,
    EstimatorConfig,
    NoiseDraw,
    Setting,
    Statistic,
    centralized_noisy,
    noisy_dispersion,
    noisy_i_squared,
    noisy_mean,
    noisy_q,
    noisy_statistic,
    release_sigma,
    true_value,
)
from hetdp.experiment import (
    DEFAULT_EPSILON_GRID,
    ComparisonRow,
    ExperimentPlan,
    ResultRow,
    read_result_csv,
    run_experiment,
    run_heterogeneity_comparison,
)
from hetdp.gaussian import (
    CalibrationResult,
    ConvergenceError,
    Mechanism,
    NoiseBranch,
    PrivacyBudget,
    SensitivitySpec,
    achieved_delta,
    agm_sigma,
    cgm_sigma,
    sample_gaussian_vector,
    std_normal_cdf,
)
from hetdp.measures import (
    HeterogeneityReport,
    MeasureContext,
    VectorDataset,
    build_context,
    dispersion,
    i_squared,
    measure_all,
    q_statistic,
)

__all__ = [
    "CANONICAL_PROFILES",
    "DEFAULT_EPSILON_GRID",
    "CalibrationResult",
    "ComparisonRow",
    "ConvergenceError",
    "DataFormat",
    "DatasetDescriptor",
    "DatasetFormatError",
    "DegenerateStatisticError",
    "ErrorReport",
    "EstimatorConfig",
    "ExperimentPlan",
    "HeterogeneityProfile",
    "HeterogeneityReport",
    "LabelScheme",
    "MeasureContext",
    "Mechanism",
    "NoiseBranch",
    "NoiseDraw",
    "PrivacyBudget",
    "ResultRow",
    "SampleCapacityError",
    "SensitivitySpec",
    "Setting",
    "Statistic",
    "VectorDataset",
    "achieved_delta",
    "agm_sigma",
    "build_context",
    "centralized_noisy",
    "cgm_sigma",
    "ci_dispersion",
    "ci_i_squared",
    "ci_q",
    "derive_seed",
    "dispersion",
    "emse",
    "error_report",
    "i_squared",
    "load_cifar",
    "load_dataset",
    "load_idx",
    "measure_all",
    "noisy_dispersion",
    "noisy_i_squared",
    "noisy_mean",
    "noisy_q",
    "noisy_statistic",
    "q_statistic",
    "read_result_csv",
    "release_sigma",
    "run_experiment",
    "run_heterogeneity_comparison",
    "sample_gaussian_vector",
    "stratified_sample",
    "synthetic_dataset",
    "tmse_dispersion",
    "tmse_i_squared",
    "tmse_q",
    "true_value",
    "write_cifar",
    "write_idx",
]

__version__ = "0.1.0"
