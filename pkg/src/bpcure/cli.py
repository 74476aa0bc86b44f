"""Command-line interface: CSV in, JSON/CSV reports out.

Subcommands: fit, simulate, influence, residuals, km, compare.  Every
randomized output is a pure function of (input bytes, options, seed); no
timestamps or environment state leak into the reports, so identical
invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .betaprime import BetaPrimeParams
from .cure import CureParams
from .errors import (
    BPCureError,
    DegenerateDataError,
    DomainError,
    EmptyFileError,
    MismatchedDataError,
    MissingColumnError,
    NonConvergenceError,
    NonNumericError,
    NotPositiveDefiniteError,
    UnachievableTargetError,
)
from .cure import s_pop
from .fit import FitResult, fit_ml, model_compare
from .gof import _modal_profile, km_estimate, rq_residuals
from .influence import case_deletion_rc, curvature, scheme_from_string
from .likelihood import SurvivalDataset
from .simulate import (
    SimConfig,
    calibrate_censor_window,
    draw_sample,
    mc_study,
    preset_config,
)

DEFAULT_SEED = 20170825

_EXIT_CODES = (
    (MissingColumnError, 3),
    (NonNumericError, 4),
    (EmptyFileError, 5),
    (DegenerateDataError, 6),
    (NonConvergenceError, 7),
    (NotPositiveDefiniteError, 8),
    (MismatchedDataError, 9),
    (UnachievableTargetError, 10),
    (DomainError, 11),
)


def load_csv(path: str) -> SurvivalDataset:
    """Load `time`,`status` plus numeric covariate columns; intercept first."""
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh)]
    except OSError as exc:
        raise EmptyFileError(f"cannot read {path}: {exc}") from exc
    rows = [row for row in rows if any(cell.strip() for cell in row)]
    if not rows:
        raise EmptyFileError(f"{path} holds no rows")
    header = [cell.strip() for cell in rows[0]]
    for required in ("time", "status"):
        if required not in header:
            raise MissingColumnError(f"{path} is missing required column {required!r}")
    body = rows[1:]
    if not body:
        raise EmptyFileError(f"{path} holds a header but no data rows")
    t_col = header.index("time")
    s_col = header.index("status")
    cov_cols = [j for j in range(len(header)) if j not in (t_col, s_col)]
    n = len(body)
    t = np.empty(n)
    delta = np.empty(n)
    X = np.ones((n, len(cov_cols) + 1))
    for i, row in enumerate(body):
        line = i + 2  # header is line 1
        if len(row) != len(header):
            raise NonNumericError(
                f"line {line}: expected {len(header)} fields, found {len(row)}"
            )
        parsed = []
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                raise NonNumericError(f"line {line}: missing value in column {header[j]!r}")
            try:
                parsed.append(float(cell))
            except ValueError as exc:
                raise NonNumericError(
                    f"line {line}: cannot parse {cell!r} in column {header[j]!r}"
                ) from exc
        t[i] = parsed[t_col]
        if parsed[s_col] not in (0.0, 1.0):
            raise NonNumericError(f"line {line}: status must be 0 or 1, found {row[s_col]!r}")
        delta[i] = parsed[s_col]
        for k, j in enumerate(cov_cols):
            X[i, k + 1] = parsed[j]
    names = ["intercept"] + [header[j] for j in cov_cols]
    return SurvivalDataset(t, delta, X, names)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _jsonable(value):
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return None if not np.isfinite(v) else v
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def _write_text(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _meta_lines(command: str, seed: int, extra: list[tuple[str, object]]) -> list[str]:
    lines = [f"# bpcure {__version__}", f"# command: {command}", f"# seed: {seed}"]
    lines += [f"# {key}: {value}" for key, value in extra]
    return lines


def _csv_text(meta: list[str], header: list[str], rows: list[list]) -> str:
    out = list(meta)
    out.append(",".join(header))
    for row in rows:
        out.append(",".join(_fmt(v) for v in row))
    return "\n".join(out) + "\n"


def _fit_report(fit: FitResult, seed: int) -> dict:
    beta_names = [w.name.split("[", 1)[1][:-1] for w in fit.wald]
    report = {
        "command": "fit",
        "version": __version__,
        "seed": seed,
        "family": fit.family,
        "fixed_alpha": _jsonable(fit.fixed_alpha),
        "n": fit.n,
        "k": fit.k,
        "loglik": _jsonable(fit.loglik),
        "aic": _jsonable(fit.aic),
        "bic": _jsonable(fit.bic),
        "converged": bool(fit.converged),
        "n_eval": fit.n_eval,
        "grad_norm": _jsonable(fit.grad_norm),
        "simplex_diameter": _jsonable(fit.simplex_diameter),
        "estimates": {
            "alpha": _jsonable(fit.estimates.alpha),
            "mu": _jsonable(fit.estimates.bp.mu),
            "phi": _jsonable(fit.estimates.bp.phi),
            "beta": {name: _jsonable(v) for name, v in zip(beta_names, fit.estimates.beta)},
        },
        "se": {
            "alpha": _jsonable(fit.se[0]),
            "mu": _jsonable(fit.se[1]),
            "phi": _jsonable(fit.se[2]),
            "beta": {name: _jsonable(v) for name, v in zip(beta_names, fit.se[3:])},
        },
        "wald": {
            w.name: {
                "estimate": _jsonable(w.estimate),
                "se": _jsonable(w.se),
                "z": _jsonable(w.z),
                "p": _jsonable(w.p),
            }
            for w in fit.wald
        },
    }
    return report


def _cmd_fit(args) -> int:
    data = load_csv(args.input)
    fit = fit_ml(data, family=args.family, seed=args.seed, n_starts=args.starts,
                 raise_on_failure=not args.keep_going)
    _write_text(args.output, json.dumps(_fit_report(fit, args.seed), sort_keys=True, indent=2) + "\n")
    return 0


def _parse_drop(values: list[str]) -> list[list[int]]:
    sets = []
    for text in values:
        try:
            ids = [int(tok) for tok in text.split(",") if tok.strip()]
        except ValueError as exc:
            raise DomainError(f"cannot parse case list {text!r}") from exc
        if any(i < 1 for i in ids):
            raise DomainError("case numbers are 1-based")
        sets.append(sorted(set(ids)))
    return sets


def _cmd_influence(args) -> int:
    data = load_csv(args.input)
    scheme = scheme_from_string(args.scheme, data)
    fit = fit_ml(data, family=args.family, seed=args.seed, n_starts=args.starts)
    report = curvature(fit, data, scheme, block=args.block)
    meta = _meta_lines("influence", args.seed, [
        ("family", fit.family),
        ("scheme", args.scheme),
        ("block", args.block),
        ("threshold", _fmt(report.threshold)),
        ("n", data.n),
    ])
    flagged = set(int(i) for i in report.flagged)
    rows = [
        [i + 1, report.C[i], 1 if i in flagged else 0, report.d_max[i]]
        for i in range(data.n)
    ]
    _write_text(args.output, _csv_text(meta, ["case", "C", "flagged", "d_max"], rows))
    if args.drop:
        sets = _parse_drop(args.drop)
        rc_rows = []
        for case_set in sets:
            zero_based = [i - 1 for i in case_set]
            try:
                rc = case_deletion_rc(fit, data, zero_based)
            except NonConvergenceError as exc:
                rc = exc.result
                if rc is None:
                    raise
            pvals = {w.name: w.p for w in rc.refit.wald} if rc.refit is not None else {}
            tag = ";".join(str(c) for c in case_set)
            for j, label in enumerate(rc.labels):
                rc_rows.append([
                    tag,
                    label,
                    rc.rc_estimate[j],
                    rc.rc_se[j],
                    pvals.get(label, None),
                ])
        rc_meta = _meta_lines("influence-rc", args.seed, [("family", fit.family)])
        _write_text(
            args.rc_output or "-",
            _csv_text(rc_meta, ["cases", "parameter", "rc_estimate", "rc_se", "p"], rc_rows),
        )
    return 0


def _cmd_residuals(args) -> int:
    data = load_csv(args.input)
    fit = fit_ml(data, family=args.family, seed=args.seed, n_starts=args.starts)
    res = rq_residuals(fit, data, seed=args.seed)
    meta = _meta_lines("residuals", args.seed, [("family", fit.family), ("n", data.n)])
    rows = [
        [
            i + 1,
            data.t[i],
            int(data.delta[i]),
            res.r[i],
            res.qq_theoretical[i],
            res.qq_empirical[i],
        ]
        for i in range(data.n)
    ]
    header = ["case", "time", "status", "residual", "qq_theoretical", "qq_empirical"]
    _write_text(args.output, _csv_text(meta, header, rows))
    return 0


def _cmd_km(args) -> int:
    data = load_csv(args.input)
    rows = []
    if args.group_by is None:
        curves = km_estimate(data)
    else:
        curves = km_estimate(data, args.group_by)
    for curve in curves:
        label = curve.label or "all"
        for k in range(curve.times.size):
            rows.append(["km", label, curve.times[k], curve.survival[k], int(curve.at_risk[k])])
    fit = fit_ml(data, family=args.family, seed=args.seed, n_starts=args.starts)
    grid = np.linspace(0.0, float(np.max(data.t)), 200)
    if args.group_by is None:
        profile = _modal_profile(data.X)
        sf = np.atleast_1d(s_pop(grid, profile, fit.estimates))
        for g, v in zip(grid, sf):
            rows.append(["model", "all", g, v, None])
    else:
        col = data.names.index(args.group_by)
        for curve in curves:
            level = float(curve.label.split("=")[1])
            mask = data.X[:, col] == level
            profile = _modal_profile(data.X[mask])
            profile[col] = level
            sf = np.atleast_1d(s_pop(grid, profile, fit.estimates))
            for g, v in zip(grid, sf):
                rows.append(["model", curve.label, g, v, None])
    meta = _meta_lines("km", args.seed, [
        ("family", fit.family),
        ("group_by", args.group_by or "none"),
        ("n", data.n),
    ])
    header = ["series", "group", "time", "survival", "at_risk"]
    _write_text(args.output, _csv_text(meta, header, rows))
    return 0


def _build_sim_config(args) -> SimConfig:
    if args.preset:
        return preset_config(args.preset, n=args.n, reps=args.reps, seed=args.seed)
    missing = [name for name in ("mu", "phi", "alpha", "beta") if getattr(args, name) is None]
    if missing:
        raise DomainError(f"simulate needs --preset or explicit --{', --'.join(missing)}")
    beta = np.asarray([float(tok) for tok in args.beta.split(",")])
    params = CureParams(alpha=args.alpha, bp=BetaPrimeParams(args.mu, args.phi), beta=beta)
    provisional = SimConfig(n=args.n, true_params=params, censor_window=(0.01, 1.0),
                            reps=args.reps, seed=args.seed)
    if args.window:
        a, b = (float(tok) for tok in args.window.split(","))
        window = (a, b)
    elif args.target_censoring is not None:
        window = calibrate_censor_window(args.target_censoring, provisional)
    else:
        raise DomainError("simulate needs --window or --target-censoring")
    return SimConfig(n=args.n, true_params=params, censor_window=window,
                     reps=args.reps, seed=args.seed)


def _cmd_simulate(args) -> int:
    config = _build_sim_config(args)
    if args.dump_sample:
        sample = draw_sample(config, 0)
        rows = [
            [sample.t[i], int(sample.delta[i]), sample.X[i, 1]]
            for i in range(sample.n)
        ]
        _write_text(args.dump_sample, _csv_text([], ["time", "status", "x1"], rows))
    report = mc_study(config, full_effort=args.full_effort)
    a, b = config.censor_window
    meta = _meta_lines("simulate", args.seed, [
        ("preset", args.preset or "custom"),
        ("n", config.n),
        ("reps", config.reps),
        ("reps_used", report.reps_used),
        ("failures", report.n_failures),
        ("censor_window", f"{_fmt(a)};{_fmt(b)}"),
        ("censoring_pct", _fmt(report.censoring_pct)),
    ])
    rows = [
        [name, report.true_values[j], report.mean[j], report.sd[j],
         report.bias[j], report.mse[j]]
        for j, name in enumerate(report.names)
    ]
    header = ["parameter", "true", "mean", "sd", "bias", "mse"]
    _write_text(args.output, _csv_text(meta, header, rows))
    return 0


def _cmd_compare(args) -> int:
    data = load_csv(args.input)
    families = [tok.strip() for tok in args.families.split(",") if tok.strip()]
    if not families:
        raise DomainError("no families to compare")
    fits = [fit_ml(data, family=f, seed=args.seed, n_starts=args.starts) for f in families]
    ranking = model_compare(fits)
    report = {
        "command": "compare",
        "version": __version__,
        "seed": args.seed,
        "n": data.n,
        "ranking": [_jsonable(row) for row in ranking],
        "fits": {f.family: _fit_report(f, args.seed) for f in fits},
    }
    _write_text(args.output, json.dumps(report, sort_keys=True, indent=2) + "\n")
    return 0


def _add_common(parser, with_input=True) -> None:
    if with_input:
        parser.add_argument("--input", required=True, help="CSV with time,status,covariates")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="RNG seed")
    parser.add_argument("--output", default="-", help="output path, - for stdout")
    parser.add_argument("--starts", type=int, default=5, help="multistart count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bpcure",
        description="Beta prime cure-rate survival models: fit, diagnose, simulate.",
    )
    parser.add_argument("--version", action="version", version=f"bpcure {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="maximum-likelihood fit, JSON report")
    _add_common(p)
    p.add_argument("--family", default="nbbp",
                   help="nbbp, mbp, promotion or fixed-alpha=<v>")
    p.add_argument("--keep-going", action="store_true",
                   help="report a non-converged fit instead of failing")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("simulate", help="Monte Carlo study, CSV report")
    p.add_argument("--preset", choices=["table1-s1", "table1-s2"], default=None)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--phi", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", default=None, help="comma list, e.g. 0.5,-1")
    p.add_argument("--window", default=None, help="censoring window a,b")
    p.add_argument("--target-censoring", type=float, default=None,
                   help="calibrate the window to this censored percentage")
    p.add_argument("--full-effort", action="store_true",
                   help="full optimizer budget per replicate")
    p.add_argument("--dump-sample", default=None,
                   help="also write replicate 0 as a loadable CSV")
    p.add_argument("--output", default="-")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("influence", help="local influence curvatures, CSV")
    _add_common(p)
    p.add_argument("--family", default="nbbp")
    p.add_argument("--scheme", default="caseweight",
                   help="caseweight, response or covariate:<name>")
    p.add_argument("--block", default="all", choices=["all", "alpha", "xi", "beta"])
    p.add_argument("--drop", action="append", default=[],
                   help="1-based case list for deletion RC, repeatable")
    p.add_argument("--rc-output", default=None, help="path for the RC table")
    p.set_defaults(func=_cmd_influence)

    p = sub.add_parser("residuals", help="randomized quantile residuals, CSV")
    _add_common(p)
    p.add_argument("--family", default="nbbp")
    p.set_defaults(func=_cmd_residuals)

    p = sub.add_parser("km", help="Kaplan-Meier curves plus model overlay, CSV")
    _add_common(p)
    p.add_argument("--family", default="nbbp")
    p.add_argument("--group-by", default=None, help="covariate to split on")
    p.set_defaults(func=_cmd_km)

    p = sub.add_parser("compare", help="AIC/BIC ranking across families, JSON")
    _add_common(p)
    p.add_argument("--families", default="nbbp,mbp")
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BPCureError as exc:
        sys.stderr.write(f"error: {exc}\n")
        for cls, code in _EXIT_CODES:
            if isinstance(exc, cls):
                return code
        return 1


if __name__ == "__main__":
    sys.exit(main())
