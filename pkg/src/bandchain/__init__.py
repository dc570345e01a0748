"""Convergence-rate certificates for band Markov chains on the nonnegative integers."""

from .bounds import (
    DriftCertificate,
    IncrementLaw,
    SpectralReport,
    alpha0_closed_form,
    alpha0_empirical,
    beta,
    drift_constants,
    mean_increment,
    psi_eval,
    solve_tau,
    spectral_report,
    verify_drift,
)
from .errors import *  # noqa: F401,F403
from .kernel import (
    AdjointKernel,
    BandKernel,
    HomogeneousTail,
    VaryingTail,
    adjoint,
    band_kernel,
    build_homogeneous_rw,
    truncate_augment,
    validate_structure,
)
from .stationary import StationaryDistribution, stationary_prefix, tail_ratio, weighted_norms
from .truncation import (
    Case,
    RateEstimate,
    TruncationResult,
    classify,
    rho_from_spectrum,
    spectrum,
    sweep,
)

__version__ = "0.1.0"
