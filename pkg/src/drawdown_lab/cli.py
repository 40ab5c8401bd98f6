"""Command-line interface: ``drawdown-lab {law, price, simulate, verify}``.

Parameters accept a single value, a comma list (``0.1,0.5,1``) or a range
``start:stop:num``; every combination is evaluated in grid order.  Output goes to
stdout (or ``--output``) as an aligned table, CSV or JSON with
``"schema": "drawdown-lab/1"``.

Exit codes: 0 success, 1 a ``verify`` comparison failed, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .closedform import Bessel3Params, BrownianParams, bes3_drawdown_lt, bes3_provider, bm_drawdown_lt, bm_provider
from .errors import DomainViolation, DrawdownLabError, NumericalError
from .expr import compile_expr
from .inversion import invert
from .mc import FUNCTIONALS, SimConfig, estimate_law
from .numeigen import numeric_model
from .passage import (dd_before_du, drawdown_transform, drawup_transform, du_before_dd, exit_transform,
                      max_at_drawdown_survival)
from .occupation import (occ_below_start_until_dd, occ_below_until_up, occ_dd_above_at_exp,
                         occ_dd_above_until_dd, occ_du_below_until_dd, occ_exit_down, occ_exit_up)
from .pricing import (HazardSpec, PricingSpec, alpha_quantile_price, dd_before_du_before_default,
                      default_before_drawdown, parisian_digital_price)
from .results import LawResult

SCHEMA = "drawdown-lab/1"
EXIT_OK, EXIT_VERIFY, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3
DEFAULT_CAP = 100_000


def _drawdown_cdf(model, x, a, t):
    res = invert(lambda q: drawdown_transform(model, q, x, a).value / q, t)
    return LawResult(res.value, res.error, "inversion", res.diagnostics)


# law id -> (function, ordered parameter names after the model)
LAWS = {
    "exit-transform": (exit_transform, ("q", "x", "y", "z")),
    "drawdown-transform": (drawdown_transform, ("q", "x", "a")),
    "drawup-transform": (drawup_transform, ("q", "x", "b")),
    "dd-before-du": (dd_before_du, ("q", "x", "a", "b")),
    "du-before-dd": (du_before_dd, ("q", "x", "a", "b")),
    "max-at-drawdown": (max_at_drawdown_survival, ("x", "m", "a")),
    "occ-exit-up": (occ_exit_up, ("q", "p", "x", "y", "a", "b")),
    "occ-exit-down": (occ_exit_down, ("q", "x", "y", "a", "b")),
    "occ-below-until-up": (occ_below_until_up, ("q", "p", "x", "y", "b")),
    "occ-below-start": (occ_below_start_until_dd, ("q", "x", "a")),
    "occ-dd-above": (occ_dd_above_until_dd, ("q", "x", "y", "a")),
    "occ-du-below": (occ_du_below_until_dd, ("q", "x", "y", "a")),
    "occ-dd-above-at-exp": (occ_dd_above_at_exp, ("q", "p", "x", "y")),
    "drawdown-cdf": (_drawdown_cdf, ("x", "a", "t")),
}

# CLI law ids that have a Monte Carlo functional
MC_NAMES = {
    "exit-transform": "exit_transform", "drawdown-transform": "drawdown_transform",
    "drawup-transform": "drawup_transform", "dd-before-du": "dd_before_du",
    "du-before-dd": "du_before_dd", "occ-exit-up": "occ_exit_up", "occ-exit-down": "occ_exit_down",
    "occ-below-until-up": "occ_below_until_up", "occ-below-start": "occ_below_start_until_dd",
    "occ-dd-above": "occ_dd_above_until_dd", "occ-du-below": "occ_du_below_until_dd",
    "occ-dd-above-at-exp": "occ_dd_above_at_exp", "drawdown-cdf": "drawdown_cdf",
}

PRODUCTS = ("parisian", "alpha-quantile", "default", "dd-before-du-default")
PARAMS = ("q", "p", "x", "y", "z", "a", "b", "m", "t")


def parse_values(text):
    """``"1"`` -> ``[1.0]``, ``"1,2"`` -> ``[1.0, 2.0]``, ``"0:1:3"`` -> ``[0, 0.5, 1]``."""
    if text is None:
        return None
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(v) for v in text]
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise DomainViolation(f"range must be start:stop:num, got {text!r}")
        return [float(v) for v in np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise DomainViolation(f"cannot parse number list {text!r}") from exc


def build_model(args):
    """Model selected by ``--model`` and its parameter flags."""
    if args.model == "bm":
        return bm_provider(BrownianParams(float(args.mu), float(args.sigma)))
    if args.model == "bes3":
        return bes3_provider(Bessel3Params())
    if args.model == "custom":
        if not args.drift or not args.diffusion:
            raise DomainViolation("custom models need --drift and --diffusion expressions")
        return numeric_model(compile_expr(args.drift), compile_expr(args.diffusion),
                             left_boundary=float(args.left), kappa=float(args.kappa), name="custom",
                             params={"drift": args.drift, "diffusion": args.diffusion})
    raise DomainViolation(f"unknown model {args.model!r}")


def _grid(args, names, defaults=None):
    values = []
    for name in names:
        vals = parse_values(getattr(args, name, None))
        if vals is None:
            if defaults and name in defaults:
                vals = [defaults[name]]
            else:
                raise DomainViolation(f"missing parameter --{name}")
        values.append(vals)
    size = math.prod(len(v) for v in values)
    if size > args.max_evals:
        raise DomainViolation(f"grid has {size} points, above the cap of {args.max_evals}")
    return [dict(zip(names, combo)) for combo in itertools.product(*values)]


def _row(inputs, fn):
    t0 = time.perf_counter()
    row = dict(inputs)
    try:
        res = fn()
        row.update(value=float(res.value), error=float(res.error), method=_method_tag(res.method),
                   status="ok")
        if not math.isfinite(row["value"]):
            row["status"] = "numerical-error: NonFiniteResult"
    except DomainViolation as exc:
        row.update(value=math.nan, error=math.nan, method="", status=f"invalid: {exc}")
    except NumericalError as exc:
        row.update(value=math.nan, error=math.nan, method="",
                   status=f"numerical-error: {type(exc).__name__}: {exc}")
    row["elapsed_s"] = time.perf_counter() - t0
    return row


def _method_tag(method):
    if method in ("closed-form", "quadrature", "mc"):
        return method
    if "inversion" in method or "stehfest" in method or method == "euler":
        return "inversion"
    return method


def _threads(args):
    return max(1, int(args.threads or os.environ.get("DRAWDOWN_LAB_THREADS", "1") or 1))


def _evaluate(args, points, make):
    with ThreadPoolExecutor(max_workers=_threads(args)) as pool:
        return list(pool.map(lambda pt: _row(pt, make(pt)), points))


def cmd_law(args):
    model = build_model(args)
    fn, names = LAWS[args.law]
    points = _grid(args, names, {"x": model.kappa})
    return _evaluate(args, points, lambda pt: (lambda: fn(model, *(pt[n] for n in names))))


def cmd_price(args):
    model = build_model(args)
    x = parse_values(args.x)[0] if args.x is not None else model.kappa
    if args.product == "parisian":
        points = _grid(args, ("y", "K", "T", "r"), {"r": 0.0})
        return _evaluate(args, points, lambda pt: (lambda: parisian_digital_price(
            model, x, PricingSpec(pt["y"], pt["K"], pt["T"], pt["r"]))))
    if args.product == "alpha-quantile":
        points = _grid(args, ("alpha", "T", "r"), {"r": 0.0})

        def make(pt):
            cap = args.cap
            fp = (lambda u: 1.0 if u < cap else 0.0) if cap else (lambda u: 1.0)
            spec = PricingSpec(barrier=1.0, strike=0.5 * pt["T"], maturity=pt["T"], rate=pt["r"],
                               alpha=pt["alpha"], payoff_deriv=fp, cap=cap)
            return lambda: alpha_quantile_price(model, x, spec)
        return _evaluate(args, points, make)
    if args.product == "default":
        names = ("q", "a") + (("y",) if args.hazard in ("drawdown-corridor", "drawup-deficit") else ())
        points = _grid(args, names)
        return _evaluate(args, points, lambda pt: (lambda: default_before_drawdown(
            model, x, HazardSpec(args.hazard, pt["q"], pt.get("y")), pt["a"])))
    points = _grid(args, ("q", "a", "b"))
    return _evaluate(args, points, lambda pt: (lambda: dd_before_du_before_default(
        model, x, pt["q"], pt["a"], pt["b"])))


def _sim_config(args):
    return SimConfig(dt=args.dt, horizon=args.horizon, n=args.n, seed=args.seed, scheme=args.scheme,
                     bridge=args.bridge, richardson_n=args.richardson_n)


def _mc_row(model, law, pt, cfg):
    t0 = time.perf_counter()
    row = dict(pt)
    prm = {k: v for k, v in pt.items() if k != "x"}
    try:
        est = estimate_law(model, MC_NAMES[law], pt["x"], prm, cfg)
        row.update(value=est.estimate, error=est.se, method="mc", status="ok",
                   richardson_shift=est.richardson_shift, richardson_se=est.richardson_se)
    except DomainViolation as exc:
        row.update(value=math.nan, error=math.nan, method="mc", status=f"invalid: {exc}")
    except NumericalError as exc:
        row.update(value=math.nan, error=math.nan, method="mc",
                   status=f"numerical-error: {type(exc).__name__}: {exc}")
    row["elapsed_s"] = time.perf_counter() - t0
    return row


def cmd_simulate(args):
    model = build_model(args)
    if args.law not in MC_NAMES:
        raise DomainViolation(f"no simulator for {args.law!r}")
    points = _grid(args, LAWS[args.law][1], {"x": model.kappa})
    cfg = _sim_config(args)
    # paths run in the numba kernel; grid points are processed in order
    return [_mc_row(model, args.law, pt, cfg) for pt in points]


def _closed_form_dd(args, model, q, x, a):
    if model.name == "bm":
        return bm_drawdown_lt(BrownianParams(float(args.mu), float(args.sigma)), q, a)
    if model.name == "bes3":
        return bes3_drawdown_lt(x, q, a)
    return drawdown_transform(model, q, x, a).value


def cmd_verify(args):
    model = build_model(args)
    rows = []
    if args.check == "identity-in-law":
        points = _grid(args, ("q", "x", "a", "y"), {"x": model.kappa if model.name != "bes3" else 2.0})
        for pt in points:
            row = _row(pt, lambda: occ_dd_above_until_dd(model, pt["q"], pt["x"], pt["y"], pt["a"]))
            if row["status"] == "ok":
                ref = _closed_form_dd(args, model, pt["q"], pt["x"], pt["a"] - pt["y"])
                row["reference"] = ref
                row["rel_err"] = abs(row["value"] - ref) / abs(ref)
                row["pass"] = bool(row["rel_err"] < args.tol)
            rows.append(row)
        return rows
    if args.check == "mc":
        if args.law not in MC_NAMES:
            raise DomainViolation(f"no simulator for {args.law!r}")
        fn, names = LAWS[args.law]
        points = _grid(args, names, {"x": model.kappa})
        cfg = _sim_config(args)
        for pt in points:
            row = _row(pt, lambda: fn(model, *(pt[n] for n in names)))
            sim = _mc_row(model, args.law, pt, cfg)
            row["mc_value"], row["mc_se"] = sim["value"], sim["error"]
            row["mc_elapsed_s"] = sim["elapsed_s"]
            if row["status"] == "ok" and sim["status"] != "ok":
                row["status"] = sim["status"]
            if row["status"] == "ok":
                dev = abs(row["value"] - sim["value"])
                row["z_score"] = dev / sim["error"] if sim["error"] > 0 else (0.0 if dev == 0 else math.inf)
                row["pass"] = bool(row["z_score"] <= args.sigmas)
            rows.append(row)
        return rows
    raise DomainViolation(f"unknown check {args.check!r}")


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _columns(rows):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def render(rows, fmt, meta):
    """Serialise rows as ``table``, ``csv`` or ``json``."""
    cols = _columns(rows)
    if fmt == "json":
        doc = {"schema": SCHEMA, "version": __version__, **meta, "rows": rows}
        return json.dumps(doc, indent=2, default=_json_default, allow_nan=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])
        return buf.getvalue()
    cells = [[c for c in cols]]
    for r in rows:
        cells.append([format(r[c], ".6g") if isinstance(r.get(c), float) else str(r.get(c, ""))
                      for c in cols])
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o).__name__)


def _add_common(p):
    p.add_argument("--model", choices=("bm", "bes3", "custom"), default="bm")
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--drift", help="drift expression in x for custom models")
    p.add_argument("--diffusion", help="diffusion expression in x for custom models")
    p.add_argument("--left", type=float, default=-math.inf, help="left boundary of a custom model")
    p.add_argument("--kappa", type=float, default=0.0, help="normalisation point of a custom model")
    for name in PARAMS:
        p.add_argument(f"--{name}", default=None)
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--output", "-o", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--max-evals", dest="max_evals", type=int, default=DEFAULT_CAP)
    p.add_argument("--config", default=None, help="JSON file with default values for any flag")


def _add_sim(p):
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--scheme", default="auto")
    p.add_argument("--bridge", action="store_true")
    p.add_argument("--richardson-n", dest="richardson_n", type=int, default=0)


def make_parser():
    parser = argparse.ArgumentParser(prog="drawdown-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("law", help="evaluate an analytic law on a parameter grid")
    p.add_argument("law", choices=sorted(LAWS))
    _add_common(p)

    p = sub.add_parser("price", help="price a drawdown product or default probability")
    p.add_argument("product", choices=PRODUCTS)
    _add_common(p)
    p.add_argument("--K", default=None)
    p.add_argument("--T", default=None)
    p.add_argument("--r", default=None)
    p.add_argument("--alpha", default=None)
    p.add_argument("--cap", type=float, default=None)
    p.add_argument("--hazard", default="constant-rate",
                   choices=("constant-rate", "drawdown-corridor", "below-start", "drawup-deficit"))

    p = sub.add_parser("simulate", help="Monte Carlo estimate of a law")
    p.add_argument("law", choices=sorted(MC_NAMES))
    _add_common(p)
    _add_sim(p)

    p = sub.add_parser("verify", help="analytic checks and analytic-versus-simulation comparisons")
    p.add_argument("check", choices=("identity-in-law", "mc"))
    p.add_argument("--law", default="drawdown-transform", choices=sorted(MC_NAMES))
    _add_common(p)
    _add_sim(p)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--sigmas", type=float, default=3.0)
    return parser


COMMANDS = {"law": cmd_law, "price": cmd_price, "simulate": cmd_simulate, "verify": cmd_verify}


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    return args


def run(argv=None, stdout=None, stderr=None):
    """Run the CLI and return the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = make_parser()
    try:
        args = _parse(parser, argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    try:
        rows = COMMANDS[args.command](args)
    except DomainViolation as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_NUMERICAL
    except DrawdownLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_NUMERICAL
    meta = {"command": args.command,
            "target": getattr(args, "law", None) or getattr(args, "product", None) or getattr(args, "check", None),
            "model": args.model, "timestamp": datetime.now(timezone.utc).isoformat()}
    text = render(rows, args.format, meta)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    invalid = [r["status"] for r in rows if r["status"].startswith("invalid")]
    numerical = [r["status"] for r in rows if r["status"].startswith("numerical")]
    if invalid:
        print(f"error: {invalid[0][len('invalid: '):]}", file=stderr)
        return EXIT_INVALID
    if numerical:
        print(numerical[0], file=stderr)
        return EXIT_NUMERICAL
    if args.command == "verify" and not all(r.get("pass", False) for r in rows):
        return EXIT_VERIFY
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))
