"""Simulation and Bayesian inference for spatially structured cluster randomized trials."""

__version__ = "0.1.0"

from .design import (
    DesignTarget,
    Randomization,
    ScenarioConfig,
    VarianceComponents,
    default_theta_grid,
    design_effect,
    icc_from_components,
    required_clusters,
    scenario_by_label,
    scenario_table,
    variance_partition,
)
from .datagen import TrialData, aggregate_clusters, generate_trial, randomize_clusters
from .geometry import (
    KernelFamily,
    KernelSpec,
    corr_matrix,
    exponential_corr,
    grid_layout,
    matern_corr,
    sample_locations,
)
from .inference import (
    EffectPosterior,
    FitResult,
    HyperGrid,
    HyperPoint,
    ModelKind,
    build_covariance,
    build_design,
    credible_interval,
    fit,
    hyper_posterior,
    marginal_effect,
    prob_exceeds,
)
from .opchar import DecisionRule, OpCharSummary, ReplicateResult, decide, summarize
from .priors import PriorSpec, default_priors, pc_range_logpdf, pc_range_rate, pc_sd_logpdf, pc_sd_rate
from .study import StudyConfig, export_plotdata, run_study
