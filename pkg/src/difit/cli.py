"""Command-line front end: ``difit <subcommand> ...``.

Every fitting subcommand prints one JSON report on stdout.  Exit status is
0 on success, 1 when estimation fails numerically, 2 on usage or input
errors.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import distributions as dist
from .bayes import McmcConfig, fit_bayes_jsb, fit_bayes_weibull
from .errors import EstimationError, ParameterError
from .gof import DegenerateSampleError
from .grouped import GROUPED_FAMILIES, OPTIMIZERS, fit_grouped, group
from .growth import GROWTH_MODELS, fit_growth, predict_height
from .gsm import GsmSpec, fit_gsm, gsm_cdf, gsm_pdf, gsm_sample
from .io import DataError, dumps_report, load_dbh, load_dbh_pairs, load_grouped, load_sample
from .mixture import (
    GROUPED_MIXTURE_FAMILIES,
    MIXTURE_FAMILIES,
    MixtureSpec,
    fit_mixture,
    fit_mixture_grouped,
    mixture_cdf,
    mixture_pdf,
    mixture_quantile,
    mixture_sample,
)
from .weibull import THREE_PARAM_METHODS, TWO_PARAM_METHODS, fit_weibull

SEED_ENV = "DIFIT_SEED"


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _column(text: str):
    return int(text) if text.strip().isdigit() else text


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _digest(x) -> dict:
    x = np.asarray(x, dtype=float)
    return {"n": int(x.size), "min": float(x.min()), "max": float(x.max())}


# ----------------------------------------------------------------------------
# input helpers


def _add_data_args(p, required=True):
    p.add_argument("--data", required=required, help="input CSV")
    p.add_argument("--plot", type=int, help="plot id; selects rows of a DBH-layout file")
    p.add_argument("--column", type=_column, default=None,
                   help="'dbh', 'height', a header name or a 1-based position "
                        "(default: dbh with --plot, else column 1)")
    p.add_argument("--plot-column", type=_column, default=1,
                   help="plot id column name or 1-based position (default 1)")


def _load(args) -> np.ndarray:
    if args.plot is not None:
        return load_dbh(args.data, args.plot, args.column or "dbh", args.plot_column)
    return load_sample(args.data, args.column or 1)


def _add_grouped_args(p):
    p.add_argument("--grouped", help="CSV of (boundary, frequency) rows")
    _add_data_args(p, required=False)
    p.add_argument("--classes", type=int, help="bin raw --data into this many equal-width classes")
    p.add_argument("--exclude-lowest", action="store_true",
                   help="drop points equal to the lowest boundary when binning")


def _load_grouped(args):
    if args.grouped:
        return load_grouped(args.grouped), None
    if not args.data or not args.classes:
        raise UsageError("give --grouped FILE, or --data FILE with --classes M")
    x = _load(args)
    return group(x, args.classes, include_lowest=not args.exclude_lowest), x


def _grouped_digest(grp) -> dict:
    return {"m": grp.m, "n": grp.n, "r": grp.r.tolist(), "f": grp.f.tolist()}


def _report(args, argv, data_digest, body: dict, config: Optional[dict] = None) -> dict:
    out = {"command": args.command, "argv": list(argv), "input": data_digest}
    out.update(body)
    if config:
        out["config"] = config
    return out


# ----------------------------------------------------------------------------
# subcommands


def cmd_fit_weibull(args, argv):
    x = _load(args)
    fit = fit_weibull(x, location=args.three_param, method=args.method,
                      starts=tuple(args.starts) if args.starts else None)
    return _report(args, argv, _digest(x), fit.to_dict())


def _trace_csv(path, fit):
    names = list(fit.traces)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration"] + names)
        start = fit.config.n_burn + 1
        for i, row in enumerate(zip(*fit.traces.values())):
            w.writerow([start + i] + [f"{v:.10g}" for v in row])


def _cmd_bayes(fn, args, argv):
    x = _load(args)
    seed = _seed(args)
    cfg = McmcConfig(n_simul=args.n_simul, n_burn=args.n_burn, seed=seed)
    fit = fn(x, cfg)
    if args.trace:
        _trace_csv(args.trace, fit)
    return _report(args, argv, _digest(x), fit.to_dict(), {"seed": seed})


def cmd_fit_bayes_weibull(args, argv):
    return _cmd_bayes(fit_bayes_weibull, args, argv)


def cmd_fit_bayes_jsb(args, argv):
    return _cmd_bayes(fit_bayes_jsb, args, argv)


def cmd_fit_grouped(args, argv):
    grp, _ = _load_grouped(args)
    fit = fit_grouped(grp, args.family, args.method,
                      starts=tuple(args.starts) if args.starts else None,
                      optimizer=args.optimizer)
    return _report(args, argv, _grouped_digest(grp), fit.to_dict())


def cmd_fit_mixture(args, argv):
    x = _load(args)
    fit = fit_mixture(x, args.family, args.k, starts=args.starts)
    return _report(args, argv, _digest(x), fit.to_dict())


def cmd_fit_mixture_grouped(args, argv):
    grp, _ = _load_grouped(args)
    fit = fit_mixture_grouped(grp, args.family, args.k, starts=args.starts)
    return _report(args, argv, _grouped_digest(grp), fit.to_dict())


def cmd_fit_gsm(args, argv):
    x = _load(args)
    fit = fit_gsm(x, args.k)
    return _report(args, argv, _digest(x), fit.to_dict())


def cmd_fit_growth(args, argv):
    if args.plot is not None:
        h, d = load_dbh_pairs(args.data, args.plot, args.h_column or "height",
                              args.d_column or "dbh", args.plot_column)
    else:
        h = load_sample(args.data, args.h_column or 1)
        d = load_sample(args.data, args.d_column or 2)
        if h.size != d.size:
            raise DataError("height and diameter columns have different numbers of values")
    fit = fit_growth(h, d, args.model, tuple(args.starts))
    if args.tabulate:
        grid = np.linspace(d.min(), d.max(), args.points)
        _write_rows(args.tabulate, ("d", "h"), grid, predict_height(args.model, fit.estimate, grid))
    return _report(args, argv, {"n": int(h.size), "d": _digest(d), "h": _digest(h)}, fit.to_dict())


def _mixture_spec(args) -> MixtureSpec:
    return MixtureSpec.from_flat(args.family, args.k, args.params)


def _points(args):
    if args.x is None:
        raise UsageError("--x is required")
    return np.asarray(args.x, dtype=float)


def cmd_mixture(args, argv):
    spec = _mixture_spec(args)
    body = {"family": spec.family, "K": spec.K, "spec": spec.rows()}
    config = None
    if args.what == "sample":
        seed = _seed(args)
        body["sample"] = mixture_sample(spec, args.n, seed)
        config = {"seed": seed}
    else:
        x = _points(args)
        fn = {"pdf": mixture_pdf, "cdf": mixture_cdf, "quantile": mixture_quantile}[args.what]
        body["x"] = x
        body[args.what] = fn(spec, x)
    return _report(args, argv, None, body, config)


def cmd_gsm(args, argv):
    spec = GsmSpec(args.omega, args.beta)
    body = {"K": spec.K, "omega": spec.omega, "beta": spec.beta}
    config = None
    if args.what == "sample":
        seed = _seed(args)
        body["sample"] = gsm_sample(spec, args.n, seed)
        config = {"seed": seed}
    elif args.what == "pdf":
        x = _points(args)
        body["x"], body["pdf"] = x, gsm_pdf(spec, x, log=args.log)
    else:
        x = _points(args)
        body["x"] = x
        body["cdf"] = gsm_cdf(spec, x, log_p=args.log_p, lower_tail=not args.upper_tail)
    return _report(args, argv, None, body, config)


def cmd_simulate(args, argv):
    seed = _seed(args)
    if args.k is None:
        x = dist.sample(args.family, args.params, args.n, seed)
        spec = {"family": dist.get_family(args.family).name, "params": args.params}
    else:
        m = _mixture_spec(args)
        x = mixture_sample(m, args.n, seed)
        spec = {"family": m.family, "K": m.K, "spec": m.rows()}
    if args.output:
        _write_rows(args.output, None, x)
    body = {"spec": spec, "n": int(x.size)}
    if not args.output:
        body["sample"] = x
    else:
        body["output"] = args.output
    return _report(args, argv, None, body, {"seed": seed})


def _write_rows(path, header, *cols):
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for row in zip(*cols):
        w.writerow([f"{v:.10g}" for v in row])
    if path in (None, "-"):
        sys.stdout.write(buf.getvalue())
    else:
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())


def tabulate(density, lo: float, hi: float, points: int):
    """Evenly spaced ``(x, density(x))`` rows over ``[lo, hi]``."""
    if points < 1:
        raise UsageError("grid needs at least one point")
    if hi < lo:
        raise UsageError("grid needs min <= max")
    if hi == lo:
        grid = np.array([lo])
    else:
        if points < 2:
            raise UsageError("a grid with min < max needs at least two points")
        grid = np.linspace(lo, hi, points)
    return grid, np.asarray(density(grid), dtype=float)


def cmd_tabulate(args, argv):
    if args.k is None:
        fam = dist.get_family(args.family)
        params = fam.normalize(args.params)

        def density(g):
            return dist.pdf(fam, params, g)
    else:
        spec = _mixture_spec(args)

        def density(g):
            return mixture_pdf(spec, g)
    grid, y = tabulate(density, args.min, args.max, args.points)
    _write_rows(args.output, None, grid, y)
    return None


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="difit", description="Fit tree diameter distributions "
                                     "and height-diameter curves.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("fit-weibull", help="two- or three-parameter Weibull")
    _add_data_args(p)
    p.add_argument("--three-param", action="store_true", help="estimate a location too")
    p.add_argument("--method", default=None,
                   help=f"2-param: {', '.join(TWO_PARAM_METHODS)}; 3-param: {', '.join(THREE_PARAM_METHODS)}")
    p.add_argument("--starts", type=_floats, help="alpha,beta,mu")
    p.set_defaults(func=cmd_fit_weibull)

    for name, fn, help_ in (("fit-bayes-weibull", cmd_fit_bayes_weibull, "Gibbs sampler, 3-param Weibull"),
                            ("fit-bayes-jsb", cmd_fit_bayes_jsb, "Gibbs sampler, Johnson's SB")):
        p = sub.add_parser(name, help=help_)
        _add_data_args(p)
        p.add_argument("--n-simul", type=int, default=10000)
        p.add_argument("--n-burn", type=int, default=8000)
        p.add_argument("--seed", type=int, help=f"default: ${SEED_ENV} or 0")
        p.add_argument("--trace", help="write retained draws to this CSV")
        p.set_defaults(func=fn)

    p = sub.add_parser("fit-grouped", help="3-param BS, GE or Weibull on grouped data")
    _add_grouped_args(p)
    p.add_argument("--family", default="weibull", choices=GROUPED_FAMILIES + ("bs",))
    p.add_argument("--method", default="em", choices=("aml", "em", "ml"))
    p.add_argument("--starts", type=_floats, help="alpha,beta,mu")
    p.add_argument("--optimizer", default="nelder-mead", choices=OPTIMIZERS)
    p.set_defaults(func=cmd_fit_grouped)

    p = sub.add_parser("fit-mixture", help="finite mixture on individual data")
    _add_data_args(p)
    p.add_argument("--family", required=True, choices=MIXTURE_FAMILIES)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--starts", type=_floats, help="w_1..w_K,alpha_1..alpha_K,beta_1..beta_K[,lambda_1..]")
    p.set_defaults(func=cmd_fit_mixture)

    p = sub.add_parser("fit-mixture-grouped", help="finite mixture on grouped data")
    _add_grouped_args(p)
    p.add_argument("--family", required=True, choices=GROUPED_MIXTURE_FAMILIES)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--starts", type=_floats)
    p.set_defaults(func=cmd_fit_mixture_grouped)

    p = sub.add_parser("fit-gsm", help="gamma shape mixture")
    _add_data_args(p)
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_fit_gsm)

    p = sub.add_parser("fit-growth", help="height-diameter curve")
    p.add_argument("--data", required=True)
    p.add_argument("--plot", type=int)
    p.add_argument("--plot-column", type=_column, default=1)
    p.add_argument("--h-column", type=_column, help="default: height (DBH layout) or column 1")
    p.add_argument("--d-column", type=_column, help="default: dbh (DBH layout) or column 2")
    p.add_argument("--model", default="weibull", choices=sorted(GROWTH_MODELS))
    p.add_argument("--starts", type=_floats, required=True, help="b1,b2,b3")
    p.add_argument("--tabulate", help="also write the fitted curve (d, h) to this CSV")
    p.add_argument("--points", type=int, default=101)
    p.set_defaults(func=cmd_fit_growth)

    p = sub.add_parser("mixture", help="evaluate or sample a mixture")
    p.add_argument("what", choices=("pdf", "cdf", "quantile", "sample"))
    p.add_argument("--family", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--params", type=_floats, required=True,
                   help="w_1..w_K,alpha_1..alpha_K,beta_1..beta_K[,lambda_1..]")
    p.add_argument("--x", type=_floats, help="evaluation points (probabilities for quantile)")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_mixture)

    p = sub.add_parser("gsm", help="evaluate or sample a gamma shape mixture")
    p.add_argument("what", choices=("pdf", "cdf", "sample"))
    p.add_argument("--omega", type=_floats, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--x", type=_floats)
    p.add_argument("--log", action="store_true", help="log density")
    p.add_argument("--log-p", action="store_true", help="log probabilities")
    p.add_argument("--upper-tail", action="store_true", help="P(X > x)")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gsm)

    p = sub.add_parser("simulate", help="random draws from a family or mixture")
    p.add_argument("--family", required=True)
    p.add_argument("--k", type=int, help="mixture with this many components")
    p.add_argument("--params", type=_floats, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="write the sample as CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tabulate", help="density on an even grid as CSV (x,density)")
    p.add_argument("--family", required=True)
    p.add_argument("--k", type=int, help="treat --params as a mixture layout")
    p.add_argument("--params", type=_floats, required=True)
    p.add_argument("--min", type=float, required=True)
    p.add_argument("--max", type=float, required=True)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_tabulate)
    return parser


def _error(kind: str, exc: Exception, code: int) -> int:
    payload = {"error": {"type": kind, "message": str(exc)}}
    last = getattr(exc, "last", None)
    if last is not None:
        payload["error"]["last_iterate"] = getattr(last, "rows", lambda: last)()
    sys.stdout.write(dumps_report(payload))
    print(f"difit: {exc}", file=sys.stderr)
    return code


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "fit-weibull" and args.method is None:
        args.method = "mle" if args.three_param else "ml"
    try:
        report = args.func(args, argv)
    except (UsageError, DataError, ParameterError, DegenerateSampleError) as exc:
        return _error(type(exc).__name__, exc, 2)
    except (EstimationError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _error(type(exc).__name__, exc, 1)
    if report is not None:
        sys.stdout.write(dumps_report(report))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
