"""Beta prime cure-rate survival models.

Library + CLI for a negative binomial cure-rate survival model with beta
prime promotion times: distribution math, censored-data maximum likelihood
with covariate-linked cure fractions, local-influence diagnostics, quantile
residuals, Kaplan-Meier comparison curves, and a Monte Carlo harness.
"""

__version__ = "0.1.0"

from .betaprime import (
    BetaPrimeParams,
    bp_cdf,
    bp_hazard,
    bp_log_pdf,
    bp_moments,
    bp_pdf,
    bp_quantile,
    bp_sf,
)
from .cure import (
    EPS_ALPHA,
    CureParams,
    SubjectLink,
    cure_fraction,
    f_noncured,
    f_pop,
    h_pop,
    s_noncured,
    s_pop,
    theta_from_p0,
)
from .errors import (
    BPCureError,
    DegenerateDataError,
    DomainError,
    EmptyFileError,
    IterationLimitError,
    MismatchedDataError,
    MissingColumnError,
    NonConvergenceError,
    NonNumericError,
    NotPositiveDefiniteError,
    UnachievableTargetError,
)
from .fit import (
    FitResult,
    WaldTest,
    fit_ml,
    model_compare,
    parse_family,
    wald_tests,
    wald_z_p,
)
from .gof import KMCurve, ResidualSet, fitted_sf_overlay, km_estimate, rq_residuals
from .influence import (
    InfluenceReport,
    PerturbationScheme,
    RCReport,
    case_deletion_rc,
    curvature,
    nabla_matrix,
    omega0,
    perturbed_loglik,
    scheme_from_string,
)
from .likelihood import (
    SurvivalDataset,
    grad_log_lik,
    hessian_log_lik,
    log_lik,
    loglik_terms,
    observed_information,
    pack_params,
    unpack_params,
)
from .simulate import (
    MCReport,
    SimConfig,
    calibrate_censor_window,
    draw_sample,
    latent_time_from_uniform,
    mc_study,
    preset_config,
)
from .special import (
    NumericTolerance,
    inv_reg_inc_beta,
    log_beta,
    log_gamma,
    reg_inc_beta,
    std_normal_cdf,
    std_normal_quantile,
)

__all__ = [name for name in dir() if not name.startswith("_")]
