"""Slow-fast stochastic system simulator with averaging diagnostics.

Spectral Galerkin truncation of a coupled slow-fast stochastic evolution
system, drift-implicit time stepping, frozen-equation ergodics, averaged
equations on both the eps-clock and the autonomous limit, and the
convergence harness tying them together.
"""

__version__ = "0.1.0"

from ._backend import backend_name, get_kernels, set_threads
from .spaces import (
    DEFAULT_CELL_EXPONENT,
    DIRICHLET_LAPLACIAN_1D,
    NEUMANN_LAPLACIAN_1D,
    STREAM_W1,
    STREAM_W2,
    ConfigurationRejected,
    GalerkinSpace,
    InvalidArgument,
    NoiseSource,
    State,
    TimeGrid,
    make_space,
    norm,
    wiener_increment,
)
from .timefuncs import TimeFunction
from . import timefuncs
from .coeffs import (
    CoefficientBundle,
    ConditionProfile,
    ExampleSystem,
    SystemParams,
    build_system,
    default_spaces,
    example_system,
    fast_contraction_rate,
    run_all_checks,
)
from .integrate import (
    IntegratorConfig,
    LimitCoefficients,
    PathSample,
    Scheme,
    SeedRecord,
    StepFailure,
    simulate_averaged_eps,
    simulate_averaged_limit,
    simulate_coupled,
    simulate_frozen,
    step_coupled,
)
from .ergodic import (
    MeasureEnsemble,
    MixingReport,
    check_evolution_property,
    dbl_distance,
    estimate_evolution_measure,
    estimate_mixing_rate,
    required_pullback,
    semigroup_expectation,
)
from .average import (
    ApDiagnosticReport,
    AveragedDriftProvider,
    BohrMeanReport,
    DeltaRule,
    DriftMode,
    KhasminskiiConfig,
    UnsupportedBundle,
    asymptotic_A,
    averaged_drift,
    bohr_limit_drift,
    bohr_mean,
    khasminskii_auxiliary,
    limit_coefficients,
    measure_ap_diagnostic,
    time_avg_G1,
    translation_number_scan,
)
from .harness import (
    ConvergenceReport,
    EpsilonResult,
    ExperimentPlan,
    KhasminskiiReport,
    RateFit,
    StoppingDiagnostic,
    run_convergence_T1,
    run_convergence_T2,
    run_khasminskii_study,
    stopping_diagnostic,
    strong_error,
)
from . import average, cli, coeffs, ergodic, harness, integrate, reportio, spaces

__all__ = [
    "DEFAULT_CELL_EXPONENT",
    "DIRICHLET_LAPLACIAN_1D",
    "NEUMANN_LAPLACIAN_1D",
    "STREAM_W1",
    "STREAM_W2",
    "ApDiagnosticReport",
    "AveragedDriftProvider",
    "BohrMeanReport",
    "CoefficientBundle",
    "ConditionProfile",
    "ConfigurationRejected",
    "ConvergenceReport",
    "DeltaRule",
    "DriftMode",
    "EpsilonResult",
    "ExampleSystem",
    "ExperimentPlan",
    "GalerkinSpace",
    "IntegratorConfig",
    "InvalidArgument",
    "KhasminskiiConfig",
    "KhasminskiiReport",
    "LimitCoefficients",
    "MeasureEnsemble",
    "MixingReport",
    "NoiseSource",
    "PathSample",
    "RateFit",
    "Scheme",
    "SeedRecord",
    "State",
    "StepFailure",
    "StoppingDiagnostic",
    "SystemParams",
    "TimeFunction",
    "TimeGrid",
    "UnsupportedBundle",
    "asymptotic_A",
    "average",
    "averaged_drift",
    "backend_name",
    "bohr_limit_drift",
    "bohr_mean",
    "build_system",
    "check_evolution_property",
    "cli",
    "coeffs",
    "dbl_distance",
    "default_spaces",
    "ergodic",
    "estimate_evolution_measure",
    "estimate_mixing_rate",
    "example_system",
    "fast_contraction_rate",
    "get_kernels",
    "harness",
    "integrate",
    "khasminskii_auxiliary",
    "limit_coefficients",
    "make_space",
    "measure_ap_diagnostic",
    "norm",
    "reportio",
    "required_pullback",
    "run_all_checks",
    "run_convergence_T1",
    "run_convergence_T2",
    "run_khasminskii_study",
    "semigroup_expectation",
    "set_threads",
    "simulate_averaged_eps",
    "simulate_averaged_limit",
    "simulate_coupled",
    "simulate_frozen",
    "spaces",
    "step_coupled",
    "stopping_diagnostic",
    "strong_error",
    "time_avg_G1",
    "timefuncs",
    "translation_number_scan",
    "wiener_increment",
]
