"""Command-line interface: ``palmpp {simulate,fit,cccd,palm,gof,pipeline}``.

Exit codes: 0 on success, 1 on a user error (bad flags, bad input files),
2 on a numerical failure, in which case a ``*.diagnostics.json`` file is
written next to the requested output.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .cccd import cccd_radii
from .core import PointPattern, RngStream, Window, make_params
from .fit import FIT_MODELS, FitConfig, OptimizationError, fit_model
from .gof import gof_envelope
from .inference import PREDICTORS, PipelineConfig, run_pipeline
from .palm import empirical_palm, palm_intensity
from .sim import simulate

log = logging.getLogger("palmpp")

EXIT_OK, EXIT_USER, EXIT_NUMERIC = 0, 1, 2


class UserError(Exception):
    """Bad input from the command line or an input file."""


class NumericalFailure(Exception):
    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default; 2 is reserved for numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------

def _parse_params(text: str) -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, val = item.partition("=")
        if not sep:
            raise UserError(f"--params entries must be key=value, got {item!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise UserError(f"--params value for {key!r} is not a number: {val!r}") from None
    return out


def _window(args) -> Window:
    if args.window and args.window_json:
        raise UserError("give either --window or --window-json, not both")
    if args.window:
        return Window.from_string(args.window)
    if args.window_json:
        return io.read_window(args.window_json)
    raise UserError("a window is required: pass --window x0,y0,x1,y1 or --window-json FILE")


def _add_window(p):
    p.add_argument("--window", help="lower then upper corner, e.g. 0,0,1,1")
    p.add_argument("--window-json", help="window sidecar JSON")


def _trunc(text: str):
    if text == "auto":
        return "auto"
    try:
        t = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("must be a positive number or 'auto'") from None
    if not t > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return t


def _manifest(args, argv, outputs, inputs=(), seed=None):
    m = io.RunManifest.create(["palmpp", *argv], seed, inputs)
    m.outputs = [str(o) for o in outputs]
    return m


def _sidecar(out, suffix) -> Path:
    out = Path(out)
    return out.with_name(out.stem + suffix)


def _split_class(p: PointPattern, label):
    """The pattern with mark ``label`` and the pattern of every other mark."""
    if label is None:
        return p, None
    if p.marks is None:
        raise UserError("--class given but the input has no class column")
    keep = p.marks == label
    if not keep.any():
        raise UserError(f"no points with class {label!r}")
    return PointPattern(p.points[keep], p.window), PointPattern(p.points[~keep], p.window)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args, argv):
    window = _window(args)
    try:
        params = make_params(args.model, **_parse_params(args.params))
    except ValueError as exc:
        raise UserError(str(exc)) from None
    p = simulate(params, window, RngStream(args.seed))
    io.write_pattern(p, args.out)
    _manifest(args, argv, [args.out], seed=args.seed).write(_sidecar(args.out, ".manifest.json"))
    log.info("wrote %d points to %s", p.n, args.out)


def _read_input(args):
    window = _window(args)
    p = io.read_pattern(args.inp, window)
    inputs = [args.inp] + ([args.window_json] if args.window_json else [])
    return p, inputs


def cmd_fit(args, argv):
    p, inputs = _read_input(args)
    p, other = _split_class(p, args.cls)
    cfg = FitConfig(args.model, t=args.trunc, edge_correction=not args.no_edge_correction)
    try:
        res = fit_model(p, cfg, other=other)
    except OptimizationError as exc:
        raise NumericalFailure(str(exc), {"model": args.model, "n_points": p.n,
                                          "trace": list(exc.trace)}) from None
    io.write_fit(res, args.out)
    _manifest(args, argv, [args.out], inputs, args.seed).write(_sidecar(args.out, ".manifest.json"))
    if not res.converged:
        log.warning("optimizer did not converge; see 'converged' in %s", args.out)


def cmd_cccd(args, argv):
    p, inputs = _read_input(args)
    if p.marks is None:
        raise UserError("cccd needs a class column in the input")
    classes = p.split_by_mark()
    if len(classes) != 2:
        raise UserError(f"cccd needs exactly two classes, found {sorted(map(str, classes))}")
    (lx, x), (ly, y) = classes.items()
    summary = cccd_radii(x, y, args.quantile)
    io.dump_json("cccd", {"classes": [str(lx), str(ly)], **summary.to_dict()}, args.out)
    _manifest(args, argv, [args.out], inputs).write(_sidecar(args.out, ".manifest.json"))


def cmd_palm(args, argv):
    p, inputs = _read_input(args)
    p, _ = _split_class(p, args.cls)
    params = io.read_fit_params(args.fit)
    inputs.append(args.fit)
    t = args.t if args.t is not None else io.load_json("fit", args.fit).get("t")
    if not isinstance(t, (int, float)) or t <= 0:
        raise UserError("no truncation: pass --t or use a fit JSON that records t")
    emp = empirical_palm(p, float(t), args.bins, edge_correction=args.edge_correction)
    fitted = palm_intensity(emp.radii, params, p.dim)
    io.write_table(args.out, ["r", "empirical", "fitted"],
                   zip(emp.radii.tolist(), emp.intensity.tolist(), np.asarray(fitted).tolist()))
    _manifest(args, argv, [args.out], inputs).write(_sidecar(args.out, ".manifest.json"))


def cmd_gof(args, argv):
    p, inputs = _read_input(args)
    p, _ = _split_class(p, args.cls)
    params = io.read_fit_params(args.fit)
    inputs.append(args.fit)
    rmax = args.rmax if args.rmax is not None else float(np.min(p.window.sides)) / 4.0
    radii = np.linspace(0.0, rmax, args.nradii)
    env = gof_envelope(p, params, args.nsim, radii, RngStream(args.seed), grid=args.grid)
    io.write_table(args.out, ["r", "observed", "lo", "hi"], env.rows())
    _manifest(args, argv, [args.out], inputs, args.seed).write(_sidecar(args.out, ".manifest.json"))
    log.info("observed F inside the envelope at %.0f%% of radii", 100 * env.inside_fraction)


IMAGE_FIT_COLUMNS = ("patient", "image", "class", "model", "ok", "converged", "t", "loglik",
                     "D", "nu", "sigma", "R", "lambda", "daughter_density",
                     "retained_fraction", "error")


def cmd_pipeline(args, argv):
    models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    bad = [m for m in models if m not in PREDICTORS]
    if bad or not models:
        raise UserError(f"--models must list names from {sorted(PREDICTORS)}, got {args.models!r}")
    windows = io.read_windows(args.windows)
    cohort = io.read_cohort(args.cohort, windows)
    cfg = PipelineConfig(models=models, boot=args.boot, seed=args.seed, workers=args.workers,
                         cost=args.cost, edge_correction=not args.no_edge_correction,
                         trunc=args.trunc)
    res = run_pipeline(cohort, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    io.write_table(out / "image_fits.csv", IMAGE_FIT_COLUMNS,
                   ([row.get(c, "") for c in IMAGE_FIT_COLUMNS] for row in res.image_fits))
    io.dump_json("bootstrap", {"boot": cfg.boot, "seed": cfg.seed, "tables": {
        name: {label: s.to_dict() for label, s in tabs.items()}
        for name, tabs in res.bootstrap.items()}}, out / "bootstrap.json")
    io.dump_json("classifiers", {"cost": cfg.cost, "warnings": res.warnings,
                                 "dropped": res.dropped,
                                 "predictors": {k: r.to_dict() for k, r in res.reports.items()}},
                 out / "classifiers.json")
    rows = []
    for name, rep in res.reports.items():
        for f, t, th in zip(rep.roc.fpr, rep.roc.tpr, rep.roc.thresholds):
            rows.append((name, float(f), float(t), float(th)))
    io.write_table(out / "roc.csv", ["predictor", "fpr", "tpr", "threshold"], rows)
    outputs = [out / n for n in ("image_fits.csv", "bootstrap.json", "classifiers.json", "roc.csv")]
    _manifest(args, argv, outputs, [args.cohort, args.windows], args.seed).write(out / "manifest.json")
    failed = sum(not r["ok"] for r in res.image_fits)
    if failed:
        log.warning("%d of %d image fits failed; see image_fits.csv", failed, len(res.image_fits))


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="palmpp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"palmpp {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a point pattern")
    p.add_argument("--model", required=True, choices=("poisson", "thomas", "matern", "void"))
    p.add_argument("--params", required=True, help="comma list, e.g. lambda=300,D=10,R=0.075")
    _add_window(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="maximum Palm likelihood fit")
    p.add_argument("--model", required=True, choices=FIT_MODELS)
    p.add_argument("--in", dest="inp", required=True)
    _add_window(p)
    p.add_argument("--class", dest="cls", help="fit only this class; the rest is the reference class")
    p.add_argument("--trunc", type=_trunc, default="auto")
    p.add_argument("--no-edge-correction", action="store_true")
    p.add_argument("--seed", type=int, help="recorded in the manifest; fitting is deterministic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cccd", help="CCCD radii and suggested truncation")
    p.add_argument("--in", dest="inp", required=True)
    _add_window(p)
    p.add_argument("--quantile", type=float, default=0.9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cccd)

    p = sub.add_parser("palm", help="empirical and fitted Palm intensity table")
    p.add_argument("--in", dest="inp", required=True)
    _add_window(p)
    p.add_argument("--class", dest="cls")
    p.add_argument("--fit", required=True)
    p.add_argument("--t", type=float)
    p.add_argument("--bins", type=int, default=30)
    p.add_argument("--edge-correction", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_palm)

    p = sub.add_parser("gof", help="empty space function envelope")
    p.add_argument("--in", dest="inp", required=True)
    _add_window(p)
    p.add_argument("--class", dest="cls")
    p.add_argument("--fit", required=True)
    p.add_argument("--nsim", type=int, default=100)
    p.add_argument("--rmax", type=float)
    p.add_argument("--nradii", type=int, default=21)
    p.add_argument("--grid", type=int, default=128)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("pipeline", help="cohort fits, bootstrap tables and classifiers")
    p.add_argument("--cohort", required=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--models", default="thomas,void")
    p.add_argument("--boot", type=int, default=1000)
    p.add_argument("--cost", choices=("brier", "misclass"), default="brier")
    p.add_argument("--trunc", type=_trunc, default="auto")
    p.add_argument("--no-edge-correction", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_pipeline)
    return ap


def _write_diagnostics(args, exc: NumericalFailure) -> Path:
    target = Path(getattr(args, "out", "palmpp"))
    path = target / "diagnostics.json" if target.is_dir() else _sidecar(target, ".diagnostics.json")
    io.dump_json("diagnostics", {"command": args.command, "error": str(exc),
                                 **exc.diagnostics}, path)
    return path


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args.func(args, argv)
    except NumericalFailure as exc:
        path = _write_diagnostics(args, exc)
        print(f"palmpp: numerical failure: {exc} (diagnostics in {path})", file=sys.stderr)
        return EXIT_NUMERIC
    except (FloatingPointError, ArithmeticError) as exc:
        path = _write_diagnostics(args, NumericalFailure(str(exc), {}))
        print(f"palmpp: numerical failure: {exc} (diagnostics in {path})", file=sys.stderr)
        return EXIT_NUMERIC
    except (UserError, ValueError, OSError) as exc:
        print(f"palmpp: error: {exc}", file=sys.stderr)
        return EXIT_USER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
