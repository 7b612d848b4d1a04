"""Multi-environment bivariate causal discovery with variability
diagnostics, a duality construction, and a seeded benchmark harness."""

from .citest import (
    CITestResult,
    InsufficientSamples,
    TestMethod,
    conditional_independence_test,
    marginal_independence_test,
)
from .cli import BenchCell, BenchConfig, SummaryRow, main, run_benchmark
from .dgp import (
    CausalStructure,
    DataFormatError,
    DeFinettiParams,
    DegenerateDensity,
    DGPConfig,
    EnvironmentData,
    InvalidConfig,
    MultiEnvDataset,
    VariabilityRegime,
    joint_log_density,
    read_dataset,
    sample_definetti_params,
    simulate_dataset,
    simulate_with_params,
    write_dataset_csv,
    write_truth_json,
)
from .discovery import (
    DiscoveryDecision,
    InsufficientEnvironments,
    PairedTable,
    build_cross_sample_pairs,
    discover_structure,
    random_baseline,
)
from .duality import (
    DualityConfig,
    DualityReport,
    MixingKind,
    MixingSpec,
    SourceFamily,
    TwoSampleMethod,
    build_elementwise_transport,
    generate_cause_variability_samples,
    generate_mechanism_variability_samples,
    source_quantiles,
    two_sample_test,
    verify_duality,
)
from .variability import (
    DensityFamily,
    DensitySpec,
    DiscrepancyQuery,
    ModulationMatrix,
    NonPositiveDensity,
    ShapeMismatch,
    VariabilityReport,
    build_gcl_modulation_matrix,
    build_modulation_matrix,
    check_sufficient_variability,
    default_discrepancy_interval,
    detect_delta_prior,
    interventional_discrepancy_fraction,
)

__version__ = "0.1.0"

__all__ = [
    "BenchCell",
    "BenchConfig",
    "CITestResult",
    "CausalStructure",
    "DGPConfig",
    "DataFormatError",
    "DeFinettiParams",
    "DegenerateDensity",
    "DensityFamily",
    "DensitySpec",
    "DiscoveryDecision",
    "DiscrepancyQuery",
    "DualityConfig",
    "DualityReport",
    "EnvironmentData",
    "InsufficientEnvironments",
    "InsufficientSamples",
    "InvalidConfig",
    "MixingKind",
    "MixingSpec",
    "ModulationMatrix",
    "MultiEnvDataset",
    "NonPositiveDensity",
    "PairedTable",
    "ShapeMismatch",
    "SourceFamily",
    "SummaryRow",
    "TestMethod",
    "TwoSampleMethod",
    "VariabilityRegime",
    "VariabilityReport",
    "build_cross_sample_pairs",
    "build_elementwise_transport",
    "build_gcl_modulation_matrix",
    "build_modulation_matrix",
    "check_sufficient_variability",
    "conditional_independence_test",
    "default_discrepancy_interval",
    "detect_delta_prior",
    "discover_structure",
    "generate_cause_variability_samples",
    "generate_mechanism_variability_samples",
    "interventional_discrepancy_fraction",
    "joint_log_density",
    "main",
    "marginal_independence_test",
    "random_baseline",
    "read_dataset",
    "run_benchmark",
    "sample_definetti_params",
    "simulate_dataset",
    "simulate_with_params",
    "source_quantiles",
    "two_sample_test",
    "verify_duality",
    "write_dataset_csv",
    "write_truth_json",
]
