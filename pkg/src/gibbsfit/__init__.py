"""Spatial Gibbs point-process fitting.

Library for fitting pairwise-interaction Gibbs point-process models by
logistic pseudolikelihood and by a semi-optimal Takacs-Fiksel estimating
function (a Fredholm equation solved per configuration by Nystrom
discretization and banded Cholesky inside Newton-Raphson), with birth/death/
shift MCMC simulation, Godambe/sandwich/bootstrap variance estimation,
replicated-pattern pooling, and a simulation-study harness.
"""

from .errors import (ConfigError, GibbsfitError, NonConvergenceError,
                     NotPositiveDefiniteError, NumericalError, SeparationError)
from .geometry import (CovariateField, PointPattern, Window, count_neighbors,
                       min_interpoint_distance, pair_count, unit_square)
from .inference import (BootstrapResult, EllipseParams, GodambeReport,
                        bootstrap_se, confidence_ellipse,
                        monte_carlo_s_and_sigma, plug_in_covariance)
from .models import (ModelInstance, PairwiseModel, conditional_intensity,
                     intensity_gradient, interaction_ratio, multiscale_hard_core,
                     operator_kernel, poisson, strauss, strauss_hard_core)
from .patternio import (load_covariate, load_fit_report, load_group_manifest,
                        load_pattern_csv, load_window_json, model_from_config,
                        save_fit_report, save_pattern_csv, save_window_json)
from .pseudolikelihood import (LogisticFitConfig, ProfileResult,
                               fit_logistic_pl, fit_logistic_pl_pooled,
                               pl_estimating_function,
                               profile_pseudolikelihood, pseudo_score)
from .quadrature import (DummyPattern, QuadratureGrid, integrate, make_grid,
                         make_grid_cell_size, make_stratified_dummy)
from .replicated import (FamilyTestResult, PooledConfig, ReplicateGroup,
                         SandwichVariance, TwoSampleResult, fit_pooled,
                         holm_adjust, sandwich_variance, two_sample_family,
                         two_sample_test)
from .results import FitResult, SolverReport
from .semioptimal import (SemiOptimalConfig, SemiOptimalSolution,
                          build_kernel_matrix, fit_semi_optimal,
                          nystrom_extend, semi_optimal_ef, solve_semi_optimal)
from .simulate import SamplerConfig, expected_points, sample_gibbs, sample_many
from .study import (ExperimentSpec, RmseRow, RmseTable, StudySetting,
                    emit_report, run_rmse_study)

__all__ = [
    "ConfigError", "GibbsfitError", "NonConvergenceError",
    "NotPositiveDefiniteError", "NumericalError", "SeparationError",
    "CovariateField", "PointPattern", "Window", "count_neighbors",
    "min_interpoint_distance", "pair_count", "unit_square",
    "ModelInstance", "PairwiseModel", "conditional_intensity",
    "intensity_gradient", "interaction_ratio", "multiscale_hard_core",
    "operator_kernel", "poisson", "strauss", "strauss_hard_core",
    "DummyPattern", "QuadratureGrid", "integrate", "make_grid",
    "make_grid_cell_size", "make_stratified_dummy",
    "LogisticFitConfig", "ProfileResult", "fit_logistic_pl",
    "fit_logistic_pl_pooled", "pl_estimating_function",
    "profile_pseudolikelihood", "pseudo_score",
    "FitResult", "SolverReport",
    "SemiOptimalConfig", "SemiOptimalSolution", "build_kernel_matrix",
    "fit_semi_optimal", "nystrom_extend", "semi_optimal_ef",
    "solve_semi_optimal",
    "BootstrapResult", "EllipseParams", "GodambeReport", "bootstrap_se",
    "confidence_ellipse", "monte_carlo_s_and_sigma", "plug_in_covariance",
    "FamilyTestResult", "PooledConfig", "ReplicateGroup", "SandwichVariance",
    "TwoSampleResult", "fit_pooled", "holm_adjust", "sandwich_variance",
    "two_sample_family", "two_sample_test",
    "SamplerConfig", "expected_points", "sample_gibbs", "sample_many",
    "load_covariate", "load_fit_report", "load_group_manifest",
    "load_pattern_csv", "load_window_json", "model_from_config",
    "save_fit_report", "save_pattern_csv", "save_window_json",
    "ExperimentSpec", "RmseRow", "RmseTable", "StudySetting",
    "emit_report", "run_rmse_study",
]

__version__ = "0.1.0"
