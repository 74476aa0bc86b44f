"""Beta prime distribution in the mean/precision parameterization.

A mean mu > 0 and precision phi > 0 map to the classical shape pair
a = mu*(phi+1), b = phi+2, so the mean is exactly mu and the variance is
mu*(mu+1)/phi.  All densities are computed in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .special import NumericTolerance, inv_reg_inc_beta, log_beta, reg_inc_beta

# forward/inverse incomplete-beta budget used by the distribution layer;
# optimizer excursions can reach large shapes where 200 steps is not enough
_BP_TOL = NumericTolerance(max_iter=600)


@dataclass(frozen=True)
class BetaPrimeParams:
    """Mean/precision parameter pair with derived classical shapes."""

    mu: float
    phi: float

    def __post_init__(self) -> None:
        mu = float(self.mu)
        phi = float(self.phi)
        if not (math.isfinite(mu) and mu > 0.0):
            raise DomainError(f"mu must be a finite positive real, got {self.mu!r}")
        if not (math.isfinite(phi) and phi > 0.0):
            raise DomainError(f"phi must be a finite positive real, got {self.phi!r}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "phi", phi)

    @property
    def shape_a(self) -> float:
        return self.mu * (self.phi + 1.0)

    @property
    def shape_b(self) -> float:
        return self.phi + 2.0


def _check_time(t, allow_zero: bool) -> tuple[np.ndarray, bool]:
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr)
    if flat.size and np.any(np.isnan(flat)):
        raise DomainError("time contains NaN")
    lower_bad = flat < 0.0 if allow_zero else flat <= 0.0
    if flat.size and np.any(lower_bad):
        bound = "t >= 0" if allow_zero else "t > 0"
        raise DomainError(f"time must satisfy {bound}")
    return arr, scalar


def bp_log_pdf(t, p: BetaPrimeParams):
    """Log density ln f(t) = (a-1) ln t - (a+b) ln(1+t) - ln B(a, b)."""
    arr, scalar = _check_time(t, allow_zero=True)
    a = p.shape_a
    b = p.shape_b
    lnb = log_beta(a, b)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = (a - 1.0) * np.log(arr) - (a + b) * np.log1p(arr) - lnb
    # t = 0 limits: -inf when a > 1 (density 0), finite when a = 1, +inf when a < 1
    zero = np.atleast_1d(arr) == 0.0
    if np.any(zero):
        out = np.atleast_1d(out)
        if a > 1.0:
            out[zero] = -np.inf
        elif a == 1.0:
            out[zero] = -lnb
        else:
            out[zero] = np.inf
        if scalar:
            return float(out[0])
    # t = inf gives nan from inf*0 style products; the density limit is 0
    inf = np.atleast_1d(np.isinf(arr))
    if np.any(inf):
        out = np.atleast_1d(out)
        out[inf] = -np.inf
        if scalar:
            return float(out[0])
    return float(out) if scalar else out


def bp_pdf(t, p: BetaPrimeParams):
    """Density of the beta prime distribution; t = 0 returns the limit value."""
    out = np.exp(bp_log_pdf(t, p))
    return out


def bp_cdf(t, p: BetaPrimeParams):
    """CDF F(t) = I_{t/(1+t)}(a, b) for t >= 0."""
    arr, scalar = _check_time(t, allow_zero=True)
    flat = np.atleast_1d(arr).astype(float)
    # inf/inf in the masked branch would warn; the where() discards it
    with np.errstate(invalid="ignore"):
        y = np.where(np.isinf(flat), 1.0, flat / (1.0 + flat))
    out = reg_inc_beta(y, p.shape_a, p.shape_b, _BP_TOL)
    out = np.atleast_1d(out)
    return float(out[0]) if scalar else out.reshape(arr.shape)


def bp_sf(t, p: BetaPrimeParams):
    """Survival 1 - F(t), computed on the complementary side for tail accuracy."""
    arr, scalar = _check_time(t, allow_zero=True)
    flat = np.atleast_1d(arr).astype(float)
    y = np.where(np.isinf(flat), 0.0, 1.0 / (1.0 + flat))
    out = np.atleast_1d(reg_inc_beta(y, p.shape_b, p.shape_a, _BP_TOL))
    return float(out[0]) if scalar else out.reshape(arr.shape)


def bp_quantile(u, p: BetaPrimeParams):
    """Quantile t with F(t) = u, for u strictly inside (0, 1)."""
    arr = np.asarray(u, dtype=float)
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr)
    if flat.size and (not np.all(np.isfinite(flat)) or np.any(flat <= 0.0) or np.any(flat >= 1.0)):
        raise DomainError("bp_quantile requires 0 < u < 1")
    w = np.atleast_1d(inv_reg_inc_beta(flat, p.shape_a, p.shape_b, _BP_TOL))
    with np.errstate(divide="ignore"):
        out = w / (1.0 - w)
    return float(out[0]) if scalar else out.reshape(arr.shape)


def bp_hazard(t, p: BetaPrimeParams):
    """Hazard f(t)/(1 - F(t)); overflows to inf where the survival underflows."""
    arr, scalar = _check_time(t, allow_zero=False)
    pdf = np.atleast_1d(bp_pdf(arr, p))
    sf = np.atleast_1d(bp_sf(arr, p))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(sf > 0.0, pdf / np.where(sf > 0.0, sf, 1.0), np.inf)
    return float(out[0]) if scalar else out.reshape(arr.shape)


def bp_moments(p: BetaPrimeParams) -> tuple[float, float]:
    """(mean, variance) = (mu, mu*(mu+1)/phi)."""
    return p.mu, p.mu * (p.mu + 1.0) / p.phi
