"""Random generation from the cure-model population law and the Monte Carlo
study harness.

Per subject: a Bernoulli(0.5) covariate fixes p0; with probability p0 the
subject is cured (latent time infinite); otherwise w ~ U(p0, 1) and the
latent time solves S_pop(y) = w, inverted in closed form through the
promotion-time CDF: F(y) = (w^-alpha - 1)/(p0^-alpha - 1) (alpha != 0) or
ln w / ln p0 (alpha = 0), then y = bp_quantile(F).  Censoring is U(a, b);
t = min(y, c), delta = 1[y <= c].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .betaprime import BetaPrimeParams, bp_quantile
from .cure import EPS_ALPHA, CureParams, cure_fraction
from .errors import DomainError, NonConvergenceError, UnachievableTargetError
from .fit import fit_ml
from .likelihood import SurvivalDataset

_PILOT_SIZE = 10_000
_PILOT_KEY = 2**31  # spawn key reserved for the calibration stream
_FIT_KEY = 2**31 + 1  # spawn keys (_FIT_KEY, rep) seed the per-replicate fits


@dataclass(frozen=True)
class SimConfig:
    n: int
    true_params: CureParams
    censor_window: tuple[float, float]
    reps: int
    seed: int

    def __post_init__(self) -> None:
        a, b = self.censor_window
        if not (0.0 < a < b and math.isfinite(b)):
            raise DomainError("censor window must satisfy 0 < a < b")
        if self.n < 2:
            raise DomainError("n must be at least 2")
        if self.reps < 1:
            raise DomainError("reps must be at least 1")
        if self.true_params.n_coef != 2:
            raise DomainError("the harness uses an intercept plus one Bernoulli covariate")


@dataclass
class MCReport:
    names: list[str]
    true_values: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    bias: np.ndarray
    mse: np.ndarray
    censoring_pct: float
    n_failures: int
    reps_used: int
    config: SimConfig


def latent_time_from_uniform(w, p0, alpha: float, bp: BetaPrimeParams):
    """Solve S_pop(y) = w for the latent promotion time y, in closed form."""
    w = np.asarray(w, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    scalar = w.ndim == 0 and p0.ndim == 0
    w1 = np.atleast_1d(w).astype(float)
    p1 = np.atleast_1d(np.broadcast_to(p0, w1.shape)).astype(float)
    if np.any(p1 <= 0.0) or np.any(p1 >= 1.0):
        raise DomainError("p0 must lie in (0, 1)")
    if np.any(w1 < p1) or np.any(w1 > 1.0):
        raise DomainError("w must lie in [p0, 1]")
    if abs(alpha) < EPS_ALPHA:
        big_f = np.log(w1) / np.log(p1)
    else:
        big_f = np.expm1(-alpha * np.log(w1)) / np.expm1(-alpha * np.log(p1))
    y = np.full(w1.shape, np.inf)
    interior = (big_f > 0.0) & (big_f < 1.0)
    if np.any(interior):
        y[interior] = bp_quantile(big_f[interior], bp)
    y[big_f <= 0.0] = 0.0
    if scalar:
        return float(y[0])
    return y


def draw_sample(config: SimConfig, rep_index: int) -> SurvivalDataset:
    """One simulated dataset; the stream is keyed by (seed, rep_index).

    Draw order per replicate: covariate block, cure block, latent block,
    censoring block -- all vectorized, so the stream layout is stable.
    """
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(int(rep_index),))
    )
    n = config.n
    params = config.true_params
    x = (rng.random(n) < 0.5).astype(float)
    X = np.column_stack([np.ones(n), x])
    p0 = cure_fraction(X, params.beta)
    v = rng.random(n)
    w = p0 + (1.0 - p0) * rng.random(n)
    a, b = config.censor_window
    c = a + (b - a) * rng.random(n)
    y = np.full(n, np.inf)
    susceptible = v >= p0
    if np.any(susceptible):
        y[susceptible] = latent_time_from_uniform(
            w[susceptible], p0[susceptible], params.alpha, params.bp
        )
    t = np.minimum(y, c)
    delta = (y <= c).astype(float)
    return SurvivalDataset(t, delta, X, names=["intercept", "x1"])


def _report_names(n_coef: int) -> list[str]:
    names = ["mu", "phi", "alpha"] + [f"beta{j}" for j in range(n_coef)]
    if n_coef == 2:
        names += ["p00", "p01"]
    return names


def _report_row(alpha: float, mu: float, phi: float, beta: np.ndarray) -> np.ndarray:
    row = [mu, phi, alpha, *beta]
    if beta.size == 2:
        row += [
            float(cure_fraction(np.array([1.0, 0.0]), beta)),
            float(cure_fraction(np.array([1.0, 1.0]), beta)),
        ]
    return np.asarray(row)


def mc_study(config: SimConfig, *, full_effort: bool = False) -> MCReport:
    """Replicated draw-and-fit study; failed fits are counted and excluded."""
    fast = dict(
        n_starts=2,
        nm_maxfev=500,
        nm_xatol=1e-5,
        bfgs_maxiter=80,
        newton_steps=4,
        confirm_maxfev=300,
    )
    kwargs = {} if full_effort else fast
    rows = []
    censor = []
    failures = 0
    for rep in range(config.reps):
        data = draw_sample(config, rep)
        fit_seed = int(
            np.random.SeedSequence(entropy=config.seed, spawn_key=(_FIT_KEY, rep)).generate_state(1)[0]
        )
        try:
            fit = fit_ml(data, family="nbbp", seed=fit_seed, **kwargs)
        except NonConvergenceError:
            if full_effort:
                failures += 1
                continue
            # near-miss ridges often clear the gate under the default budget;
            # true boundary collapses (phi -> 0) fail either way
            try:
                fit = fit_ml(data, family="nbbp", seed=fit_seed)
            except NonConvergenceError:
                failures += 1
                continue
        est = fit.estimates
        rows.append(_report_row(est.alpha, est.bp.mu, est.bp.phi, est.beta))
        censor.append(100.0 * float(np.mean(data.delta == 0.0)))
    tp = config.true_params
    true_row = _report_row(tp.alpha, tp.bp.mu, tp.bp.phi, tp.beta)
    names = _report_names(tp.n_coef)
    used = len(rows)
    if used == 0:
        raise NonConvergenceError("every replicate failed to converge", result=None)
    mat = np.vstack(rows)
    mean = np.mean(mat, axis=0)
    # ddof=0 keeps the MSE = bias^2 + SD^2 identity exact
    sd = np.std(mat, axis=0, ddof=0) if used > 1 else np.full(mean.shape, np.nan)
    bias = mean - true_row
    mse = np.mean((mat - true_row) ** 2, axis=0)
    return MCReport(
        names=names,
        true_values=true_row,
        mean=mean,
        sd=sd,
        bias=bias,
        mse=mse,
        censoring_pct=float(np.mean(censor)),
        n_failures=failures,
        reps_used=used,
        config=config,
    )


def _pilot_latents(config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-covariate-level cure fractions and susceptible latent times.

    The cure indicator, the censoring-position uniform, and the balanced
    binary covariate are all integrated out analytically, so the only Monte
    Carlo noise left in the calibration is the latent-position sample.  A
    shared U(0, 1) draw is mapped through each level's w ~ U(p0, 1).
    """
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(_PILOT_KEY,))
    )
    params = config.true_params
    u = rng.random(_PILOT_SIZE)
    X = np.column_stack([np.ones(2), np.array([0.0, 1.0])])
    p0 = cure_fraction(X, params.beta)
    y = np.empty((2, _PILOT_SIZE))
    for lvl in range(2):
        w = p0[lvl] + (1.0 - p0[lvl]) * u
        y[lvl] = latent_time_from_uniform(
            w, np.full(_PILOT_SIZE, p0[lvl]), params.alpha, params.bp
        )
    return p0, y


def calibrate_censor_window(target_pct: float, config: SimConfig) -> tuple[float, float]:
    """Pick (a, b) so the expected censored share hits target_pct within 1pp.

    a is pinned at 0.01 and b found by bisection on the expected censored
    share, which is monotone decreasing in b.  Given a latent time y the
    chance that C ~ U(a, b) falls short of it is clip((y - a)/(b - a), 0, 1),
    and cured subjects are censored with probability one, so the expectation
    only needs the pilot latent sample.
    """
    if not (0.0 < target_pct < 100.0):
        raise DomainError("target percentage must lie in (0, 100)")
    a = 0.01
    p0, y = _pilot_latents(config)
    cured = float(np.mean(p0))

    def pct(b: float) -> float:
        hit = np.clip((y - a) / (b - a), 0.0, 1.0)
        per_level = p0 + (1.0 - p0) * np.mean(hit, axis=1)
        return 100.0 * float(np.mean(per_level))

    floor = 100.0 * cured
    if target_pct < floor - 1.0:
        raise UnachievableTargetError(
            f"target {target_pct:.2f}% lies below the cure-induced floor {floor:.2f}%"
        )
    lo = a * (1.0 + 1e-9)
    if pct(lo) < target_pct - 1.0:
        raise UnachievableTargetError(
            f"target {target_pct:.2f}% exceeds the ceiling {pct(lo):.2f}% at b -> a"
        )
    hi = max(1.0, 2.0 * a)
    while pct(hi) > target_pct and hi < 1e9:
        hi *= 2.0
    if pct(hi) > target_pct:
        # the floor is within 1pp of the target; use the huge window
        return a, hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        value = pct(mid)
        if abs(value - target_pct) <= 0.05:
            return a, mid
        if value > target_pct:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return a, 0.5 * (lo + hi)


TABLE1_PRESETS = {
    "table1-s1": {
        "mu": 0.5,
        "phi": 1.0,
        "alpha": 2.0,
        "beta": (0.5, -1.0),
        "target_censoring": 52.98,
    },
    "table1-s2": {
        "mu": 1.0,
        "phi": 10.0,
        "alpha": 2.0,
        "beta": (0.5, -1.0),
        "target_censoring": 65.85,
    },
}


def preset_config(name: str, n: int, reps: int, seed: int) -> SimConfig:
    """Build a SimConfig for a named scenario, calibrating the window."""
    if name not in TABLE1_PRESETS:
        raise DomainError(f"unknown preset {name!r}; expected one of {sorted(TABLE1_PRESETS)}")
    spec = TABLE1_PRESETS[name]
    params = CureParams(
        alpha=spec["alpha"],
        bp=BetaPrimeParams(spec["mu"], spec["phi"]),
        beta=np.asarray(spec["beta"]),
    )
    provisional = SimConfig(
        n=n, true_params=params, censor_window=(0.01, 1.0), reps=reps, seed=seed
    )
    window = calibrate_censor_window(spec["target_censoring"], provisional)
    return SimConfig(n=n, true_params=params, censor_window=window, reps=reps, seed=seed)
