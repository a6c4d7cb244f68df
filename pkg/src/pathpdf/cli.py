"""Command-line front end.

Every subcommand writes TSV tables and a ``manifest.txt`` into ``--out-dir``.
Passing that manifest back with ``--manifest`` reruns the same computation;
explicit flags override manifest entries.

Exit codes: 0 success, 1 configuration error, 2 numeric failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

import numpy as np

from . import __version__, kernels
from .analysis import ck_residual, compare_model_to_data, convergence_study, parameter_sweep
from .integrator import NumericError, OutsideMassWarning, SamplingConfig, default_grid, default_span, pdf_curve
from .io import ensure_dir, read_histogram, read_manifest, read_tsv, write_histogram, write_manifest, write_tsv
from .market import build_histogram, load_price_sheet, log_returns
from .model import ModelParams

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

# flags that never enter a manifest
_VOLATILE = {"threads", "manifest", "out_dir", "beta"}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _add_sampling(p):
    g = p.add_argument_group("sampling")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--points", type=int, default=2 ** 16, help="points per replica")
    g.add_argument("--replicas", type=int, default=10)
    g.add_argument("--sampler", choices=("sobol", "cmc"), default="sobol")
    g.add_argument("--domain", choices=("bridge", "box"), default="bridge")
    g.add_argument("--dof", type=float, default=6.0, help="Student-t degrees of freedom of the bridge proposal")
    g.add_argument("--threads", type=int, default=1)


def _add_model(p, sweep=False):
    g = p.add_argument_group("model")
    if not sweep:
        g.add_argument("--gamma", type=float)
        g.add_argument("--p", type=float)
        s = g.add_mutually_exclusive_group()
        s.add_argument("--sigma", type=float)
        s.add_argument("--beta", type=float, help="alternative to --sigma")
    g.add_argument("--r", type=float, default=0.0)
    g.add_argument("--T", type=float, default=1.0)
    g.add_argument("--D", type=int, default=10)
    g.add_argument("--label", default=None, help="human-readable horizon, e.g. 5m (metadata only)")


def _add_grid(p):
    p.add_argument("--grid-points", type=int, default=40)
    p.add_argument("--span", type=float, default=None, help="total log-return span of the grid")


def _add_common(p):
    p.add_argument("--out-dir", default=".")
    p.add_argument("--manifest", default=None, help="rerun the configuration recorded in a manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pathpdf", description="Path-integral transition densities of log-prices.")
    parser.add_argument("--version", action="version", version=f"pathpdf {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("pdf", help="transition density on a grid")
    _add_model(p)
    _add_grid(p)
    _add_sampling(p)
    _add_common(p)

    p = sub.add_parser("hist", help="empirical histogram of log-returns")
    p.add_argument("--file", required=False)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--bins", type=int, default=120)
    p.add_argument("--range", type=float, default=None, dest="range", help="total log-return span")
    p.add_argument("--center", default="zero", help="zero, mean, or a number")
    p.add_argument("--gap-tolerance", type=float, default=0.1)
    p.add_argument("--interval", type=float, default=None, help="sampling period in seconds")
    _add_common(p)

    p = sub.add_parser("converge", help="dimension-convergence study")
    p.add_argument("--dims", type=_ints, default=None)
    _add_model(p)
    _add_grid(p)
    _add_sampling(p)
    _add_common(p)

    p = sub.add_parser("ck", help="Chapman-Kolmogorov residual")
    p.add_argument("--split", type=float, default=0.5)
    p.add_argument("--mesh", type=int, default=81)
    _add_model(p)
    _add_grid(p)
    _add_sampling(p)
    _add_common(p)

    p = sub.add_parser("compare", help="compare a model curve with a histogram")
    p.add_argument("--hist")
    p.add_argument("--curve")
    p.add_argument("--k", type=float, default=1.0, help="error-bar multiple for the within fraction")
    _add_common(p)

    p = sub.add_parser("sweep", help="rank (gamma, p, sigma) triples against a histogram")
    p.add_argument("--hist")
    p.add_argument("--gammas", type=_floats)
    p.add_argument("--ps", type=_floats)
    p.add_argument("--sigmas", type=_floats)
    _add_model(p, sweep=True)
    _add_sampling(p)
    p.add_argument("--grid-points", type=int, default=40)
    _add_common(p)
    return parser


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if args.command is None:
        raise ConfigError("a subcommand is required")
    if args.manifest:
        entries = read_manifest(args.manifest)
        if entries.get("command", args.command) != args.command:
            raise ConfigError(f"manifest is for '{entries['command']}', not '{args.command}'")
        sp = _subparser(parser, args.command)
        defaults = {}
        for action in sp._actions:
            if action.dest in entries and action.dest not in _VOLATILE:
                raw = entries[action.dest]
                defaults[action.dest] = action.type(raw) if action.type else raw
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _params(args) -> ModelParams:
    _require(args, "gamma", "p")
    if args.sigma is None and args.beta is None:
        raise ConfigError("one of --sigma or --beta is required")
    kw = dict(r=args.r, T=args.T, D=args.D)
    if args.sigma is not None:
        return ModelParams(args.gamma, args.p, args.sigma, **kw)
    return ModelParams.from_beta(args.gamma, args.p, args.beta, **kw)


def _config(args) -> SamplingConfig:
    return SamplingConfig(n=args.points, replicas=args.replicas, seed=args.seed,
                          sampler=args.sampler, domain=args.domain, dof=args.dof)


def _base_manifest(args) -> dict:
    m = {"command": args.command, "version": __version__, "backend": kernels.BACKEND}
    for k, v in vars(args).items():
        if k in _VOLATILE or k == "command":
            continue
        m[k] = v
    return m


def _model_manifest(args, params):
    m = _base_manifest(args)
    m["sigma"] = params.sigma
    m["beta_value"] = params.beta
    return m


def _grid(args, params):
    # pin the span so a rerun from the manifest rebuilds the identical grid
    if args.span is None:
        args.span = default_span(params)
    return default_grid(params, args.span, args.grid_points)


def cmd_pdf(args):
    params = _params(args)
    grid = _grid(args, params)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OutsideMassWarning)
        curve = pdf_curve(0.0, grid, params, _config(args), workers=args.threads)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_tsv(os.path.join(args.out_dir, "curve.tsv"),
              {"grid": curve.grid, "density": curve.density, "stderr": curve.stderr})
    m = _model_manifest(args, params)
    m["outside_mass"] = curve.meta["outside_mass"]
    m["outputs"] = "curve.tsv"
    return m


def cmd_hist(args):
    _require(args, "file", "range")
    series = load_price_sheet(args.file, interval=args.interval)
    diag = {}
    returns = log_returns(series, args.stride, args.gap_tolerance, diag)
    center = args.center if args.center in ("zero", "mean") else float(args.center)
    hist = build_histogram(returns, args.bins, args.range, center)
    write_histogram(os.path.join(args.out_dir, "histogram.tsv"), hist)
    m = _base_manifest(args)
    m.update(file=os.path.abspath(args.file), rows=series.sample_count, interval_seconds=series.interval,
             pairs=diag["pairs"], skipped_gaps=diag["skipped_gaps"], returns=int(returns.size),
             out_of_range=hist.out_of_range, outputs="histogram.tsv")
    return m


def cmd_converge(args):
    _require(args, "dims")
    params = _params(args)
    grid = _grid(args, params.replace(D=max(args.dims)))
    rep = convergence_study(params, args.dims, _config(args), grid=grid, workers=args.threads)
    cols = {"grid": rep.grid}
    for d, c in zip(rep.dims, rep.curves):
        cols[f"density_D{d}"] = c.density
        cols[f"stderr_D{d}"] = c.stderr
    write_tsv(os.path.join(args.out_dir, "converge_curves.tsv"), cols)
    pairs = [(i, j) for i in range(len(rep.dims)) for j in range(i + 1, len(rep.dims))]
    write_tsv(os.path.join(args.out_dir, "converge_metrics.tsv"), {
        "D1": [rep.dims[i] for i, _ in pairs],
        "D2": [rep.dims[j] for _, j in pairs],
        "relative": [rep.pairwise_metric[i, j] for i, j in pairs],
        "absolute": [rep.pairwise_absolute[i, j] for i, j in pairs],
        "sup": [rep.pairwise_sup[i, j] for i, j in pairs],
    })
    m = _model_manifest(args, params)
    m["max_qmc_error"] = rep.max_qmc_error()
    m["outputs"] = "converge_curves.tsv,converge_metrics.tsv"
    return m


def cmd_ck(args):
    params = _params(args)
    grid = _grid(args, params)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OutsideMassWarning)
        rep = ck_residual(params, args.split, _config(args), mesh=args.mesh, grid=grid, workers=args.threads)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_tsv(os.path.join(args.out_dir, "ck.tsv"), {
        "grid": grid,
        "direct": rep.direct.density,
        "direct_stderr": rep.direct.stderr,
        "composed": rep.composed.density,
        "composed_stderr": rep.composed.stderr,
        "residual": rep.residual,
    })
    m = _model_manifest(args, params)
    m.update(rep.summary())
    m["compatible_with_zero"] = rep.max_z < 3.0
    m["outputs"] = "ck.tsv"
    return m


class _Curve:
    def __init__(self, grid, density):
        self.grid, self.density = grid, density


def cmd_compare(args):
    _require(args, "hist", "curve")
    hist = read_histogram(args.hist)
    t = read_tsv(args.curve)
    if "grid" not in t or "density" not in t:
        raise ConfigError(f"{args.curve}: expected 'grid' and 'density' columns")
    curve = _Curve(t["grid"], t["density"])
    fit = compare_model_to_data(hist, curve, k=args.k)
    model = np.interp(hist.bin_centers, curve.grid, curve.density)
    write_tsv(os.path.join(args.out_dir, "compare.tsv"), {
        "bin_center": hist.bin_centers, "density": hist.density, "errbar": hist.errbar, "model": model,
    })
    m = _base_manifest(args)
    m["hist"] = os.path.abspath(args.hist)
    m["curve"] = os.path.abspath(args.curve)
    m.update(log_rmse=fit.log_rmse, within_fraction=fit.within_fraction, chi2=fit.chi2, bins=fit.bins,
             rmse_bins=fit.rmse_bins, central_within=fit.central_within, outer_within=fit.outer_within,
             outputs="compare.tsv")
    return m


def cmd_sweep(args):
    _require(args, "hist", "gammas", "ps", "sigmas")
    hist = read_histogram(args.hist)
    base = ModelParams(1.0, 2.0, 1.0, r=args.r, T=args.T, D=args.D)
    rows = parameter_sweep(hist, args.gammas, args.ps, args.sigmas, base, _config(args),
                           points=args.grid_points, workers=args.threads)
    write_tsv(os.path.join(args.out_dir, "sweep.tsv"), {
        "rank": np.arange(1, len(rows) + 1),
        "gamma": [r.gamma for r in rows],
        "p": [r.p for r in rows],
        "sigma": [r.sigma for r in rows],
        "log_rmse": [r.metrics.log_rmse for r in rows],
        "within_fraction": [r.metrics.within_fraction for r in rows],
        "chi2": [r.metrics.chi2 for r in rows],
    })
    m = _base_manifest(args)
    m["hist"] = os.path.abspath(args.hist)
    m["best"] = (rows[0].gamma, rows[0].p, rows[0].sigma)
    m["outputs"] = "sweep.tsv"
    return m


COMMANDS = {
    "pdf": cmd_pdf,
    "hist": cmd_hist,
    "converge": cmd_converge,
    "ck": cmd_ck,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        if getattr(args, "threads", 1) < 1:
            raise ConfigError("--threads must be at least 1")
        ensure_dir(args.out_dir)
        manifest = COMMANDS[args.command](args)
        write_manifest(os.path.join(args.out_dir, "manifest.txt"), manifest)
    except (NumericError, ArithmeticError) as exc:
        print(f"pathpdf: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"pathpdf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"pathpdf: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
