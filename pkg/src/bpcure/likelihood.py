"""Censored-data log-likelihood for the cure model, with numerical
derivatives and the observed information matrix.

The likelihood is sum_i [delta_i ln f_pop(t_i) + (1 - delta_i) ln S_pop(t_i)].
Evaluations that underflow return a -inf sentinel rather than raising, so
derivative-free optimizers can treat them as rejections.  Derivatives are
central differences in the natural parameter vector
theta = (alpha, mu, phi, beta_0, ..., beta_q).
"""

from __future__ import annotations

import numpy as np

from .betaprime import BetaPrimeParams, bp_cdf, bp_log_pdf
from .cure import EPS_ALPHA, CureParams, log_cure_fraction
from .errors import (
    DegenerateDataError,
    DomainError,
    MismatchedDataError,
    NotPositiveDefiniteError,
)

_EPS = np.finfo(float).eps


class SurvivalDataset:
    """Right-censored survival data with an intercept-first design matrix."""

    def __init__(self, t, delta, X, names=None):
        t = np.asarray(t, dtype=float).reshape(-1)
        delta = np.asarray(delta, dtype=float).reshape(-1)
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise MismatchedDataError("X must be a 2-d design matrix")
        if not (t.shape[0] == delta.shape[0] == X.shape[0]):
            raise MismatchedDataError(
                f"length mismatch: t {t.shape[0]}, delta {delta.shape[0]}, X rows {X.shape[0]}"
            )
        if t.shape[0] == 0:
            raise DegenerateDataError("dataset is empty")
        if not np.all(np.isfinite(t)) or np.any(t < 0.0):
            raise DomainError("times must be finite and nonnegative")
        if not np.all(np.isin(delta, (0.0, 1.0))):
            raise DomainError("status indicators must be 0 or 1")
        if np.any((t == 0.0) & (delta == 1.0)):
            raise DomainError("an event at time 0 is not representable")
        if not np.all(np.isfinite(X)):
            raise DomainError("covariates must be finite")
        if np.linalg.matrix_rank(X) < X.shape[1]:
            raise DegenerateDataError("design matrix is rank deficient")
        if names is None:
            names = ["intercept"] + [f"x{j}" for j in range(1, X.shape[1])]
        if len(names) != X.shape[1]:
            raise MismatchedDataError("names length must match design columns")
        self.t = t
        self.delta = delta
        self.X = X
        self.names = list(names)

    @property
    def n(self) -> int:
        return self.t.shape[0]

    @property
    def n_coef(self) -> int:
        return self.X.shape[1]

    @property
    def n_events(self) -> int:
        return int(np.sum(self.delta))

    def event_times(self) -> np.ndarray:
        return self.t[self.delta == 1.0]

    def subset(self, keep) -> "SurvivalDataset":
        keep = np.asarray(keep)
        return SurvivalDataset(self.t[keep], self.delta[keep], self.X[keep], self.names)

    def drop(self, indices) -> "SurvivalDataset":
        mask = np.ones(self.n, dtype=bool)
        mask[np.asarray(indices, dtype=int)] = False
        return self.subset(mask)

    def with_time(self, t) -> "SurvivalDataset":
        return SurvivalDataset(t, self.delta, self.X, self.names)

    def with_design(self, X) -> "SurvivalDataset":
        return SurvivalDataset(self.t, self.delta, X, self.names)

    def fingerprint(self) -> int:
        return hash((self.t.tobytes(), self.delta.tobytes(), self.X.tobytes()))


def pack_params(params: CureParams) -> np.ndarray:
    return np.concatenate(([params.alpha, params.bp.mu, params.bp.phi], params.beta))


def unpack_params(vec) -> CureParams:
    vec = np.asarray(vec, dtype=float).reshape(-1)
    if vec.size < 4:
        raise MismatchedDataError("parameter vector needs alpha, mu, phi and an intercept")
    return CureParams(alpha=vec[0], bp=BetaPrimeParams(vec[1], vec[2]), beta=vec[3:])


def param_labels(data: SurvivalDataset) -> list[str]:
    return ["alpha", "mu", "phi"] + [f"beta[{name}]" for name in data.names]


def loglik_terms(params: CureParams, data: SurvivalDataset) -> np.ndarray:
    """Per-case log-likelihood contributions; non-finite terms become -inf."""
    if data.n_coef != params.n_coef:
        raise MismatchedDataError(
            f"model has {params.n_coef} coefficients, data has {data.n_coef} columns"
        )
    ev = data.delta == 1.0
    logp0 = log_cure_fraction(data.X, params.beta)
    big_f = bp_cdf(data.t, params.bp)
    alpha = params.alpha
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        if abs(alpha) < EPS_ALPHA:
            log_s = big_f * logp0
            terms = log_s.copy()
            if np.any(ev):
                logpdf = bp_log_pdf(data.t[ev], params.bp)
                terms[ev] = np.log(-logp0[ev]) + log_s[ev] + logpdf
        else:
            alpha_theta = np.expm1(-alpha * logp0)
            at_f = np.where(big_f > 0.0, alpha_theta * big_f, 0.0)
            l1p = np.log1p(at_f)
            terms = (-1.0 / alpha) * l1p
            if np.any(ev):
                logpdf = bp_log_pdf(data.t[ev], params.bp)
                terms[ev] = (
                    (-1.0 / alpha - 1.0) * l1p[ev]
                    + np.log(alpha_theta[ev] / alpha)
                    + logpdf
                )
    return np.where(np.isfinite(terms), terms, -np.inf)


def log_lik(params: CureParams, data: SurvivalDataset) -> float:
    """Total log-likelihood; -inf signals an invalid or underflowing point."""
    return float(np.sum(loglik_terms(params, data)))


def _loglik_vec(vec: np.ndarray, data: SurvivalDataset) -> float:
    try:
        params = unpack_params(vec)
    except DomainError:
        return -np.inf
    return log_lik(params, data)


def _finite_or_raise(value: float, where: str) -> float:
    if not np.isfinite(value):
        raise DomainError(f"log-likelihood is not finite {where}")
    return value


def grad_log_lik(params: CureParams, data: SurvivalDataset, indices=None) -> np.ndarray:
    """Central-difference gradient, step eps^(1/3) max(|theta_j|, 1) per axis."""
    theta = pack_params(params)
    if indices is None:
        indices = range(theta.size)
    indices = list(indices)
    out = np.zeros(len(indices))
    h0 = _EPS ** (1.0 / 3.0)
    for k, j in enumerate(indices):
        h = h0 * max(abs(theta[j]), 1.0)
        up = theta.copy()
        up[j] += h
        dn = theta.copy()
        dn[j] -= h
        fu = _finite_or_raise(_loglik_vec(up, data), f"at +step on coordinate {j}")
        fd = _finite_or_raise(_loglik_vec(dn, data), f"at -step on coordinate {j}")
        out[k] = (fu - fd) / (2.0 * h)
    return out


def hessian_log_lik(params: CureParams, data: SurvivalDataset, indices=None) -> np.ndarray:
    """Central-difference Hessian, step eps^(1/4) scaling, symmetrized."""
    theta = pack_params(params)
    if indices is None:
        indices = range(theta.size)
    indices = list(indices)
    d = len(indices)
    h0 = _EPS**0.25
    steps = np.array([h0 * max(abs(theta[j]), 1.0) for j in indices])
    f0 = _finite_or_raise(_loglik_vec(theta, data), "at the expansion point")

    def at(offsets) -> float:
        vec = theta.copy()
        for j, s in offsets:
            vec[j] += s
        return _finite_or_raise(_loglik_vec(vec, data), "inside the Hessian stencil")

    hess = np.empty((d, d))
    for a in range(d):
        ja, ha = indices[a], steps[a]
        hess[a, a] = (at([(ja, ha)]) - 2.0 * f0 + at([(ja, -ha)])) / (ha * ha)
        for b in range(a + 1, d):
            jb, hb = indices[b], steps[b]
            mixed = (
                at([(ja, ha), (jb, hb)])
                - at([(ja, ha), (jb, -hb)])
                - at([(ja, -ha), (jb, hb)])
                + at([(ja, -ha), (jb, -hb)])
            ) / (4.0 * ha * hb)
            hess[a, b] = mixed
            hess[b, a] = mixed
    return 0.5 * (hess + hess.T)


def observed_information(params: CureParams, data: SurvivalDataset, indices=None) -> np.ndarray:
    """Sigma = -Hessian at (or near) the MLE; raises if not positive definite."""
    sigma = -hessian_log_lik(params, data, indices)
    eigs = np.linalg.eigvalsh(sigma)
    if np.any(eigs <= 0.0):
        raise NotPositiveDefiniteError(
            "observed information has non-positive eigenvalues", eigenvalues=eigs
        )
    return sigma
