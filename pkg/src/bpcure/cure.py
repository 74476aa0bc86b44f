"""Population law of the negative binomial beta prime cure model.

A latent negative binomial count of competing causes with dispersion alpha
and beta prime promotion times yields the improper population survival
function

    S_pop(t) = [1 + alpha*theta*F(t)]^(-1/alpha),    theta = (p0^-alpha - 1)/alpha,

which plateaus at the cure fraction p0 = logistic(x'beta).  alpha = -1 gives
the mixture cure model, alpha -> 0 the promotion time (Poisson) model,
alpha = 1 the geometric model.  Inside |alpha| < EPS_ALPHA the exact
alpha = 0 forms are used: S_pop = p0^F(t), f_pop = -ln(p0) p0^F(t) f(t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .betaprime import BetaPrimeParams, bp_cdf, bp_log_pdf
from .errors import DegenerateDataError, DomainError, MismatchedDataError

# below this magnitude the alpha = 0 branch is used; the two branches agree
# to ~1e-12 across the band, avoiding cancellation in expm1/log1p ratios
EPS_ALPHA = 1e-6


@dataclass(frozen=True)
class CureParams:
    """Dispersion alpha, promotion-time law, and cure-link coefficients."""

    alpha: float
    bp: BetaPrimeParams
    beta: np.ndarray

    def __post_init__(self) -> None:
        alpha = float(self.alpha)
        if not math.isfinite(alpha):
            raise DomainError("alpha must be finite")
        beta = np.asarray(self.beta, dtype=float).reshape(-1)
        if beta.size == 0 or not np.all(np.isfinite(beta)):
            raise DomainError("beta must be a nonempty finite vector")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n_coef(self) -> int:
        return self.beta.size


@dataclass(frozen=True)
class SubjectLink:
    """Per-subject covariates with the implied cure fraction and theta."""

    x: np.ndarray
    p0: float
    theta: float


def _linear_predictor(x, beta: np.ndarray) -> np.ndarray:
    xarr = np.asarray(x, dtype=float)
    if xarr.ndim == 1:
        if xarr.shape[0] != beta.size:
            raise MismatchedDataError(
                f"covariate vector has length {xarr.shape[0]}, expected {beta.size}"
            )
    elif xarr.ndim == 2:
        if xarr.shape[1] != beta.size:
            raise MismatchedDataError(
                f"covariate matrix has {xarr.shape[1]} columns, expected {beta.size}"
            )
    else:
        raise MismatchedDataError("covariates must be a vector or a matrix")
    return xarr @ beta


def log_cure_fraction(x, beta) -> np.ndarray:
    """ln p0 = -ln(1 + exp(-x'beta)), overflow-safe for any linear predictor."""
    beta = np.asarray(beta, dtype=float).reshape(-1)
    eta = _linear_predictor(x, beta)
    return -np.logaddexp(0.0, -eta)


def cure_fraction(x, beta):
    """Cure fraction p0 = exp(x'beta)/(1 + exp(x'beta))."""
    out = np.exp(log_cure_fraction(x, beta))
    return float(out) if np.ndim(out) == 0 else out


def subject_link(x, params: CureParams) -> SubjectLink:
    x = np.asarray(x, dtype=float).reshape(-1)
    p0 = cure_fraction(x, params.beta)
    return SubjectLink(x=x, p0=p0, theta=theta_from_p0(p0, params.alpha))


def theta_from_p0(p0, alpha: float):
    """theta = (p0^-alpha - 1)/alpha, with the -ln p0 limit near alpha = 0."""
    arr = np.asarray(p0, dtype=float)
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr)
    if flat.size and (not np.all(np.isfinite(flat)) or np.any(flat <= 0.0) or np.any(flat >= 1.0)):
        raise DomainError("theta_from_p0 requires 0 < p0 < 1")
    logp0 = np.log(arr)
    if abs(alpha) < EPS_ALPHA:
        out = -logp0
    else:
        out = np.expm1(-alpha * logp0) / alpha
    return float(out) if scalar else out


def _prepare(t, x, params: CureParams, allow_zero: bool):
    """Broadcast times against covariate rows; returns (t, log_p0, scalar)."""
    tarr = np.asarray(t, dtype=float)
    scalar = tarr.ndim == 0
    tflat = np.atleast_1d(tarr).astype(float)
    if tflat.size and np.any(np.isnan(tflat)):
        raise DomainError("time contains NaN")
    lower_bad = tflat < 0.0 if allow_zero else tflat <= 0.0
    if tflat.size and np.any(lower_bad):
        bound = "t >= 0" if allow_zero else "t > 0"
        raise DomainError(f"time must satisfy {bound}")
    logp0 = log_cure_fraction(x, params.beta)
    logp0 = np.atleast_1d(np.asarray(logp0, dtype=float))
    if logp0.size not in (1, tflat.size):
        raise MismatchedDataError(
            f"{logp0.size} covariate rows cannot pair with {tflat.size} times"
        )
    return tflat, logp0, scalar, tarr.shape


def log_s_pop(t, x, params: CureParams):
    """ln S_pop(t); vectorized over t (single covariate row broadcasts)."""
    tflat, logp0, scalar, shape = _prepare(t, x, params, allow_zero=True)
    big_f = bp_cdf(tflat, params.bp)
    alpha = params.alpha
    if abs(alpha) < EPS_ALPHA:
        out = big_f * logp0
    else:
        alpha_theta = np.expm1(-alpha * logp0)
        # alpha_theta can overflow to inf for extreme links; 0 * inf must stay 0
        at_f = np.where(big_f > 0.0, alpha_theta * big_f, 0.0)
        out = (-1.0 / alpha) * np.log1p(at_f)
    return float(out[0]) if scalar else np.asarray(out).reshape(shape)


def s_pop(t, x, params: CureParams):
    """Population survival; equals 1 at t = 0 and plateaus at p0."""
    out = np.exp(log_s_pop(t, x, params))
    return out


def log_f_pop(t, x, params: CureParams):
    """ln f_pop(t) = ln[theta f(t) (1 + alpha theta F(t))^(-1/alpha - 1)]."""
    tflat, logp0, scalar, shape = _prepare(t, x, params, allow_zero=False)
    big_f = bp_cdf(tflat, params.bp)
    log_f = bp_log_pdf(tflat, params.bp)
    alpha = params.alpha
    if abs(alpha) < EPS_ALPHA:
        out = np.log(-logp0) + big_f * logp0 + log_f
    else:
        alpha_theta = np.expm1(-alpha * logp0)
        at_f = np.where(big_f > 0.0, alpha_theta * big_f, 0.0)
        with np.errstate(divide="ignore"):
            log_theta = np.log(alpha_theta / alpha)
        out = (-1.0 / alpha - 1.0) * np.log1p(at_f) + log_theta + log_f
    return float(out[0]) if scalar else np.asarray(out).reshape(shape)


def f_pop(t, x, params: CureParams):
    """Defective population density, -dS_pop/dt; integrates to 1 - p0."""
    return np.exp(log_f_pop(t, x, params))


def h_pop(t, x, params: CureParams):
    """Population hazard theta f(t) [1 + alpha theta F(t)]^(-1) = f_pop/S_pop."""
    tflat, logp0, scalar, shape = _prepare(t, x, params, allow_zero=False)
    big_f = bp_cdf(tflat, params.bp)
    log_f = bp_log_pdf(tflat, params.bp)
    alpha = params.alpha
    if abs(alpha) < EPS_ALPHA:
        out = -logp0 * np.exp(log_f)
    else:
        alpha_theta = np.expm1(-alpha * logp0)
        theta = alpha_theta / alpha
        at_f = np.where(big_f > 0.0, alpha_theta * big_f, 0.0)
        out = theta * np.exp(log_f) / (1.0 + at_f)
    out = np.atleast_1d(np.asarray(out, dtype=float))
    return float(out[0]) if scalar else out.reshape(shape)


def _p0_guard(logp0: np.ndarray) -> np.ndarray:
    p0 = np.exp(logp0)
    if np.any(p0 >= 1.0 - 1e-12):
        raise DegenerateDataError("cure fraction >= 1 - 1e-12; non-cured law undefined")
    return p0


def s_noncured(t, x, params: CureParams):
    """Proper survival of the susceptible sub-population, (S_pop - p0)/(1 - p0)."""
    tflat, logp0, scalar, shape = _prepare(t, x, params, allow_zero=True)
    p0 = _p0_guard(logp0)
    spop = np.exp(np.atleast_1d(np.asarray(log_s_pop(tflat, x, params))))
    out = (spop - p0) / (1.0 - p0)
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out.reshape(shape)


def f_noncured(t, x, params: CureParams):
    """Proper density of the susceptible sub-population, f_pop/(1 - p0)."""
    tflat, logp0, scalar, shape = _prepare(t, x, params, allow_zero=False)
    p0 = _p0_guard(logp0)
    fpop = np.exp(np.atleast_1d(np.asarray(log_f_pop(tflat, x, params))))
    out = fpop / (1.0 - p0)
    return float(out[0]) if scalar else out.reshape(shape)
