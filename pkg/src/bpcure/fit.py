"""Maximum-likelihood fitting of the cure model.

The search runs in an unconstrained space u = (alpha, ln mu, ln phi, beta)
(alpha dropped when the family fixes it), so every u maps to a valid
parameter point.  Stages: Nelder-Mead from deterministic multistarts, a
quasi-Newton (BFGS) polish driven by the numerical gradient, a safeguarded
Newton polish, and a final small-simplex Nelder-Mead pass whose terminal
simplex diameter feeds the convergence check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .cure import CureParams, cure_fraction
from .errors import (
    DegenerateDataError,
    DomainError,
    IterationLimitError,
    MismatchedDataError,
    NonConvergenceError,
    NotPositiveDefiniteError,
)
from .likelihood import (
    SurvivalDataset,
    grad_log_lik,
    log_lik,
    observed_information,
    pack_params,
    param_labels,
    unpack_params,
)
from .special import std_normal_cdf

_BIG = 1e18
_EPS = np.finfo(float).eps

GRAD_TOL = 1e-5
SIMPLEX_TOL = 1e-8

FAMILIES = ("nbbp", "mbp", "promotion")


def parse_family(family: str) -> tuple[str, float | None]:
    """Map a family name to (canonical name, fixed alpha or None)."""
    name = family.strip().lower()
    if name == "nbbp":
        return "nbbp", None
    if name == "mbp":
        return "mbp", -1.0
    if name == "promotion":
        return "promotion", 0.0
    if name.startswith("fixed-alpha="):
        try:
            value = float(name.split("=", 1)[1])
        except ValueError as exc:
            raise DomainError(f"cannot parse fixed alpha from {family!r}") from exc
        if not np.isfinite(value):
            raise DomainError("fixed alpha must be finite")
        return name, value
    raise DomainError(
        f"unknown family {family!r}; expected nbbp, mbp, promotion or fixed-alpha=<v>"
    )


@dataclass
class WaldTest:
    name: str
    estimate: float
    se: float
    z: float
    p: float


@dataclass
class FitResult:
    estimates: CureParams
    se: np.ndarray
    loglik: float
    aic: float
    bic: float
    wald: list[WaldTest]
    converged: bool
    n_eval: int
    fixed_alpha: float | None
    family: str
    n: int
    k: int
    grad_norm: float
    simplex_diameter: float
    labels: list[str]
    free_indices: list[int]
    cov: np.ndarray | None
    seed: int
    data_fingerprint: int
    message: str = ""


class _Transform:
    """Bijection between the free search vector u and natural parameters."""

    def __init__(self, n_coef: int, fixed_alpha: float | None):
        self.n_coef = n_coef
        self.fixed_alpha = fixed_alpha
        self.dim_natural = n_coef + 3
        if fixed_alpha is None:
            self.free_natural = list(range(self.dim_natural))
        else:
            self.free_natural = list(range(1, self.dim_natural))
        self.dim = len(self.free_natural)

    def to_natural(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        theta = np.empty(self.dim_natural)
        if self.fixed_alpha is None:
            theta[0] = u[0]
            rest = u[1:]
        else:
            theta[0] = self.fixed_alpha
            rest = u
        # overflow to inf is fine; the objective rejects non-finite points
        with np.errstate(over="ignore"):
            theta[1] = np.exp(rest[0])
            theta[2] = np.exp(rest[1])
        theta[3:] = rest[2:]
        return theta

    def from_natural(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        rest = np.concatenate(([np.log(theta[1]), np.log(theta[2])], theta[3:]))
        if self.fixed_alpha is None:
            return np.concatenate(([theta[0]], rest))
        return rest

    def scale(self, theta: np.ndarray) -> np.ndarray:
        """d(theta_free)/du along the diagonal chain rule."""
        parts = [theta[1], theta[2]] + [1.0] * (self.dim_natural - 3)
        if self.fixed_alpha is None:
            parts = [1.0] + parts
        return np.asarray(parts)


def _logistic_start(data: SurvivalDataset) -> np.ndarray:
    """Logistic regression of the censoring indicator as a crude cure proxy."""
    X = data.X
    z = 1.0 - data.delta
    beta = np.zeros(X.shape[1])
    for _ in range(25):
        eta = X @ beta
        p = 1.0 / (1.0 + np.exp(-np.clip(eta, -30.0, 30.0)))
        w = np.clip(p * (1.0 - p), 1e-6, None)
        hess = X.T @ (X * w[:, None]) + 1e-8 * np.eye(X.shape[1])
        grad = X.T @ (z - p)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return np.zeros(X.shape[1])
        beta = beta + step
        if np.max(np.abs(step)) < 1e-8:
            break
    if not np.all(np.isfinite(beta)):
        return np.zeros(X.shape[1])
    return np.clip(beta, -10.0, 10.0)


def _start_points(
    data: SurvivalDataset,
    tf: _Transform,
    init: CureParams | None,
    seed: int,
    n_starts: int,
) -> list[np.ndarray]:
    events = data.event_times()
    mu0 = float(np.median(events))
    mu0 = max(mu0, 1e-3)
    beta0 = _logistic_start(data)
    alphas = (-1.0, 0.1, 1.0, 2.0)
    starts: list[np.ndarray] = []

    def base_u(alpha0: float) -> np.ndarray:
        theta = np.concatenate(([alpha0, mu0, 1.0], beta0))
        return tf.from_natural(theta)

    if init is not None:
        starts.append(tf.from_natural(pack_params(init)))
    if tf.fixed_alpha is None:
        for a0 in alphas:
            starts.append(base_u(a0))
    else:
        starts.append(base_u(tf.fixed_alpha))
    base_count = max(len(starts), 1)
    idx = 0
    while len(starts) < n_starts:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(idx,)))
        jitter = rng.normal(0.0, 0.4, size=tf.dim)
        starts.append(starts[idx % base_count] + jitter)
        idx += 1
    return starts[:n_starts]


def _newton_polish(f, u, steps, grad):
    """Newton steps on the smoothed objective with ridge and backtracking.

    Near the optimum real objective gains fall below float rounding of f, so
    candidate acceptance falls back to a gradient-norm decrease whenever the
    objective change is within rounding slack.
    """
    d = u.size
    h0 = _EPS**0.25
    fu = f(u)
    g = grad(u)
    gnorm = float(np.max(np.abs(g)))
    for _ in range(steps):
        if gnorm < 1e-7:
            break
        hess = np.empty((d, d))
        hs = h0 * np.maximum(np.abs(u), 1.0)
        for a in range(d):
            ea = np.zeros(d)
            ea[a] = hs[a]
            hess[a, a] = (f(u + ea) - 2.0 * fu + f(u - ea)) / (hs[a] * hs[a])
            for b in range(a + 1, d):
                eb = np.zeros(d)
                eb[b] = hs[b]
                mixed = (
                    f(u + ea + eb) - f(u + ea - eb) - f(u - ea + eb) + f(u - ea - eb)
                ) / (4.0 * hs[a] * hs[b])
                hess[a, b] = mixed
                hess[b, a] = mixed
        try:
            eigs = np.linalg.eigvalsh(hess)
            ridge = max(0.0, 1e-8 - float(eigs[0]))
            step = np.linalg.solve(hess + ridge * np.eye(d), -g)
        except np.linalg.LinAlgError:
            break
        slack = 8.0 * _EPS * max(1.0, abs(fu))
        scale = 1.0
        accepted = False
        for _ in range(12):
            cand = u + scale * step
            fc = f(cand)
            if fc <= fu + slack:
                gc = grad(cand)
                gcnorm = float(np.max(np.abs(gc)))
                if fc < fu - slack or gcnorm < 0.7 * gnorm:
                    u, fu, g, gnorm = cand, min(fc, fu), gc, gcnorm
                    accepted = True
                    break
            scale *= 0.5
        if not accepted:
            break
    return u, fu


def fit_ml(
    data: SurvivalDataset,
    family: str = "nbbp",
    init: CureParams | None = None,
    seed: int = 0,
    *,
    n_starts: int = 5,
    nm_maxfev: int | None = None,
    nm_xatol: float = 1e-6,
    bfgs_maxiter: int = 60,
    newton_steps: int = 6,
    confirm_maxfev: int | None = None,
    raise_on_failure: bool = True,
) -> FitResult:
    """Maximize the censored log-likelihood; see module docstring for stages.

    Raises NonConvergenceError (with the best FitResult attached) when the
    gradient/simplex criteria are not met, unless raise_on_failure is False.
    """
    family_name, fixed_alpha = parse_family(family)
    if data.n_events == 0:
        raise DegenerateDataError("all observations censored; cure fraction unidentified")
    tf = _Transform(data.n_coef, fixed_alpha)
    if data.n <= tf.dim:
        raise DegenerateDataError(f"n = {data.n} does not exceed k = {tf.dim}")
    if init is not None and init.n_coef != data.n_coef:
        raise MismatchedDataError("init has the wrong number of coefficients")

    evals = {"count": 0}

    def objective(u: np.ndarray) -> float:
        evals["count"] += 1
        theta = tf.to_natural(u)
        if not np.all(np.isfinite(theta)):
            return _BIG
        try:
            val = log_lik(unpack_params(theta), data)
        except IterationLimitError:
            # absurd but finite proposals (phi ~ exp(300)) can stall the
            # incomplete-beta continued fraction; treat them as rejections
            return _BIG
        return -val if np.isfinite(val) else _BIG

    def objective_grad(u: np.ndarray) -> np.ndarray:
        # chain-rule gradient from the natural-space differences; fall back
        # to differencing the penalized objective when the stencil leaves
        # the finite region
        theta = tf.to_natural(u)
        try:
            g_nat = grad_log_lik(unpack_params(theta), data, tf.free_natural)
            evals["count"] += 2 * tf.dim
            return -g_nat * tf.scale(theta)
        except (DomainError, MismatchedDataError, IterationLimitError):
            g = np.empty(tf.dim)
            for j in range(tf.dim):
                h = _EPS ** (1.0 / 3.0) * max(abs(u[j]), 1.0)
                up = u.copy()
                up[j] += h
                dn = u.copy()
                dn[j] -= h
                g[j] = (objective(up) - objective(dn)) / (2.0 * h)
            return g

    d = tf.dim
    stage_a_budget = nm_maxfev if nm_maxfev is not None else 200 * d
    candidates: list[tuple[float, int, np.ndarray]] = []
    for si, u0 in enumerate(_start_points(data, tf, init, seed, n_starts)):
        res = minimize(
            objective,
            u0,
            method="Nelder-Mead",
            options={
                "maxfev": stage_a_budget,
                "xatol": nm_xatol,
                "fatol": 1e-8,
            },
        )
        candidates.append((float(res.fun), si, np.asarray(res.x)))
    candidates.sort(key=lambda c: (c[0], c[1]))
    best_f, _, best_u = candidates[0]
    if best_f >= _BIG:
        raise NonConvergenceError("no start reached a finite likelihood", result=None)

    if bfgs_maxiter > 0:
        res = minimize(
            objective,
            best_u,
            method="BFGS",
            jac=objective_grad,
            options={"gtol": 1e-7, "maxiter": bfgs_maxiter},
        )
        if np.isfinite(res.fun) and res.fun <= best_f:
            best_f, best_u = float(res.fun), np.asarray(res.x)

    if newton_steps > 0:
        best_u, best_f = _newton_polish(objective, best_u, newton_steps, objective_grad)

    confirm_budget = confirm_maxfev if confirm_maxfev is not None else 200 * d
    simplex = np.empty((d + 1, d))
    simplex[0] = best_u
    for j in range(d):
        simplex[j + 1] = best_u
        simplex[j + 1, j] += 1e-5 * max(abs(best_u[j]), 1.0)
    res = minimize(
        objective,
        best_u,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "maxfev": confirm_budget,
            "xatol": 1e-9,
            "fatol": 1e-11,
        },
    )
    # the confirmation pass measures the terminal simplex; its point is
    # adopted only on a gain beyond float rounding, since inside the noise
    # ball the simplex can drift away from the gradient-polished optimum
    diameter = np.inf
    if res.fun <= best_f + 1e-6 * max(1.0, abs(best_f)):
        sim = res.final_simplex[0]
        diameter = float(np.max(np.abs(sim[1:] - sim[0])))
        slack = 8.0 * _EPS * max(1.0, abs(best_f))
        if res.fun < best_f - slack:
            best_f, best_u = float(res.fun), np.asarray(res.x)

    theta_hat = tf.to_natural(best_u)
    params = unpack_params(theta_hat)
    loglik = -best_f
    message = ""
    try:
        g_nat = grad_log_lik(params, data, tf.free_natural)
        grad_norm = float(np.max(np.abs(g_nat)))
    except DomainError:
        grad_norm = np.inf
        message = "gradient stencil left the finite region"
    converged = grad_norm < GRAD_TOL and diameter < SIMPLEX_TOL

    se_full = np.full(tf.dim_natural, np.nan)
    cov = None
    try:
        sigma = observed_information(params, data, tf.free_natural)
        cov = np.linalg.inv(sigma)
        se_free = np.sqrt(np.diag(cov))
        for pos, j in enumerate(tf.free_natural):
            se_full[j] = se_free[pos]
    except (NotPositiveDefiniteError, DomainError, np.linalg.LinAlgError) as exc:
        converged = False
        message = message or f"information matrix not usable: {exc}"

    labels = param_labels(data)
    k = tf.dim
    aic = -2.0 * loglik + 2.0 * k
    bic = -2.0 * loglik + k * np.log(data.n)
    wald = []
    for j, name in enumerate(data.names):
        est = float(params.beta[j])
        se_j = float(se_full[3 + j])
        z, p = wald_z_p(est, se_j)
        wald.append(WaldTest(name=f"beta[{name}]", estimate=est, se=se_j, z=z, p=p))

    result = FitResult(
        estimates=params,
        se=se_full,
        loglik=loglik,
        aic=aic,
        bic=bic,
        wald=wald,
        converged=converged,
        n_eval=evals["count"],
        fixed_alpha=fixed_alpha,
        family=family_name,
        n=data.n,
        k=k,
        grad_norm=grad_norm,
        simplex_diameter=diameter,
        labels=labels,
        free_indices=list(tf.free_natural),
        cov=cov,
        seed=seed,
        data_fingerprint=data.fingerprint(),
        message=message,
    )
    if not converged and raise_on_failure:
        raise NonConvergenceError(
            f"fit did not converge (grad {grad_norm:.3e}, simplex {diameter:.3e})",
            result=result,
        )
    return result


def wald_z_p(estimate: float, se: float) -> tuple[float, float]:
    """Wald statistic and two-sided standard normal p-value."""
    if not np.isfinite(se) or se <= 0.0:
        return np.nan, np.nan
    z = estimate / se
    p = 2.0 * std_normal_cdf(-abs(z))
    return float(z), float(p)


def wald_tests(fit: FitResult) -> list[WaldTest]:
    """Per-coefficient Wald tests for the cure-link coefficients."""
    return list(fit.wald)


def cure_fraction_report(fit: FitResult, profiles: dict[str, np.ndarray]) -> dict[str, float]:
    """Cure fractions at named covariate profiles."""
    return {name: float(cure_fraction(np.asarray(x, float), fit.estimates.beta)) for name, x in profiles.items()}


def model_compare(fits: list[FitResult]) -> list[dict]:
    """AIC/BIC ranking of fits on one dataset, sorted by AIC."""
    if not fits:
        raise MismatchedDataError("nothing to compare")
    fp = fits[0].data_fingerprint
    if any(f.data_fingerprint != fp for f in fits):
        raise MismatchedDataError("fits were produced on different datasets")
    best_aic = min(f.aic for f in fits)
    best_bic = min(f.bic for f in fits)
    rows = []
    for f in sorted(fits, key=lambda f: f.aic):
        rows.append(
            {
                "family": f.family,
                "k": f.k,
                "loglik": f.loglik,
                "aic": f.aic,
                "bic": f.bic,
                "delta_aic": f.aic - best_aic,
                "delta_bic": f.bic - best_bic,
            }
        )
    return rows
