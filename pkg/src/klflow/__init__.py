"""Langevin / Fokker-Planck KL-dissipation toolkit.

Simulates Langevin diffusion against a time-dependent Gaussian-family
target, solves the matching Fokker-Planck equation on 1D/2D grids, and
checks the dissipation identity

    d/dt KL(q_t | p_t) = -E_q |grad log(q_t/p_t)|^2 - E_q d/dt log p_t

numerically and against closed-form Gaussian oracles.
"""

from ._backend import KERNEL_IMPLEMENTATION
from .assumptions import (
    AssumptionReport,
    DifferentiabilityReport,
    check_differentiability,
    check_dissipativity,
    check_growth,
    check_lipschitz,
    probe_points,
    run_all_checks,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    build_family,
    load_config,
)
from .diagnostics import (
    DiagnosticsRecord,
    EnvelopeReport,
    FisherResult,
    HistogramKLResult,
    IdentitySummary,
    check_envelope,
    compute_record,
    expected_dt_log_p,
    histogram_kl,
    kl_divergence,
    kl_time_derivative_fd,
    l1_distance,
    relative_fisher_information,
    verify_identity,
)
from .fokker_planck import (
    StabilityError,
    estimate_stable_dt,
    face_drifts,
    fp_solve,
    fp_step,
)
from .grid import (
    Axis,
    Grid,
    GridDensity,
    build_grid,
    coarsen,
    discretize,
)
from .oracle import (
    GaussianState,
    dt_term_gaussian,
    evolve_moments,
    fisher_gaussian,
    gaussian_state,
    identity_residual_gaussian,
    kl_derivative_gaussian,
    kl_gaussian,
)
from .rng import standard_normals, uniforms
from .sde import (
    HistogramResult,
    ParticleEnsemble,
    em_step,
    histogram_density,
    init_gaussian_ensemble,
    simulate,
)
from .targets import (
    GaussianMixturePathFamily,
    GaussianPath,
    GaussianPathFamily,
    Schedule,
    SignFlippedGaussianStub,
    TargetFamily,
    make_gaussian_mixture_path,
    make_gaussian_path,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_IMPLEMENTATION",
    "__version__",
    # targets
    "Schedule", "GaussianPath", "TargetFamily", "GaussianPathFamily",
    "GaussianMixturePathFamily", "SignFlippedGaussianStub",
    "make_gaussian_path", "make_gaussian_mixture_path",
    # grid
    "Axis", "Grid", "GridDensity", "build_grid", "discretize", "coarsen",
    # solver
    "StabilityError", "face_drifts", "fp_step", "estimate_stable_dt", "fp_solve",
    # particles
    "ParticleEnsemble", "HistogramResult", "init_gaussian_ensemble",
    "em_step", "simulate", "histogram_density",
    # rng
    "uniforms", "standard_normals",
    # diagnostics
    "DiagnosticsRecord", "IdentitySummary", "EnvelopeReport", "FisherResult",
    "HistogramKLResult", "kl_divergence", "relative_fisher_information",
    "expected_dt_log_p", "compute_record", "kl_time_derivative_fd",
    "verify_identity", "check_envelope", "l1_distance", "histogram_kl",
    # oracle
    "GaussianState", "gaussian_state", "evolve_moments", "kl_gaussian",
    "fisher_gaussian", "dt_term_gaussian", "kl_derivative_gaussian",
    "identity_residual_gaussian",
    # assumptions
    "AssumptionReport", "DifferentiabilityReport", "probe_points",
    "check_dissipativity", "check_lipschitz", "check_growth",
    "check_differentiability", "run_all_checks",
    # config
    "ConfigError", "ExperimentConfig", "load_config", "build_family",
]
