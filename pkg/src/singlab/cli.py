"""Command-line front end.

Every command prints one JSON document (schema "singlab/1", sorted keys) that
embeds the fully resolved configuration.  Exit status 0 on success, 2 on
invalid input, 3 when a computational budget is exhausted; errors are written
to stderr as JSON.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

import mpmath
import numpy as np

from . import __version__
from .errors import SinglabError, ValidationError

SCHEMA = "singlab/1"
PRECISION_DPS = {"double": 15, "extended": 60}


# ---------------------------------------------------------------------------
# input helpers


def load_json_arg(text, what):
    """Inline JSON, a path to a JSON file, or a bare string (e.g. a preset name)."""
    if text is None:
        return None
    if os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if text.replace("_", "").isalnum():
            return text
        raise ValidationError(f"cannot parse {what} as JSON: {text[:60]!r}")


def resolve_weights(args):
    from .weights import Weights, equal_weights
    obj = load_json_arg(args.weights, "weights")
    if obj is None:
        return equal_weights(args.m, args.n)
    if not isinstance(obj, dict):
        raise ValidationError("weights must be a JSON object {\"a\": [...], \"b\": [...]}")
    return Weights.from_json(obj)


def resolve_fractal(args, weights):
    from .fractal import ProductFractal
    obj = load_json_arg(args.fractal, "fractal")
    return ProductFractal.from_json("unit_interval" if obj is None else obj, weights.m, weights.n)


def resolve_profile(spec, K, weights, strict=False):
    from .exponents import EtaProfile, closed_form_profile, eta_optimize, zeta_closed_form
    from .weights import parse_number
    if spec in (None, "closed", "closed-form"):
        return closed_form_profile(K, weights)
    if spec == "auto":
        cf = zeta_closed_form(K, weights)
        return eta_optimize(cf.bounds, weights, strict=strict)
    obj = load_json_arg(spec, "eta profile")
    if isinstance(obj, dict):
        obj = obj.get("eta", obj.get("eta_profile", {}).get("eta") if isinstance(obj.get("eta_profile"), dict) else None)
    if not isinstance(obj, list):
        raise ValidationError("eta must be 'closed', 'auto', a JSON list or an object with an 'eta' list")
    if len(obj) != weights.d - 1:
        raise ValidationError(f"eta needs {weights.d - 1} entries")
    return EtaProfile(tuple(parse_number(x) for x in obj), weights, source="user")


def parse_list(text, what):
    obj = load_json_arg(text, what)
    if isinstance(obj, (int, float)):
        return [obj]
    if isinstance(obj, str):
        obj = [x for x in obj.split(",") if x]
    if not isinstance(obj, list):
        raise ValidationError(f"{what} must be a list")
    return obj


def parse_value(text):
    from .weights import parse_number
    if text in ("inf", "infinity"):
        return math.inf
    return parse_number(text)


# ---------------------------------------------------------------------------
# output helpers


def to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else x.numerator
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if hasattr(x, "to_json"):
        return to_jsonable(x.to_json())
    return x


def dumps(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2)


def csv_text(rows, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([to_jsonable(x) for x in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def cmd_bound(args, cfg):
    from .bounds import bound_report
    W = resolve_weights(args)
    K = resolve_fractal(args, W)
    profile = resolve_profile(args.eta, K, W)
    omega = None if args.omega is None else parse_value(args.omega)
    p = None if args.p is None else parse_value(args.p)
    gamma = None if args.gamma is None else parse_value(args.gamma)
    rep = bound_report(K, W, profile, p=p, omega=omega, gamma=gamma).to_json()
    cfg.update(weights=W.to_json(), fractal=K.to_json(), eta=args.eta or "closed")
    rows = [[rep["bound"], rep["bound_exact"], rep["s"], ";".join(map(str, rep["eta_profile"]["eta"])),
             rep["provenance"]]]
    return rep, (rows, ["bound", "bound_exact", "s", "eta", "provenance"])


def cmd_zeta(args, cfg):
    from .exponents import tail_slope, zeta_closed_form
    W = resolve_weights(args)
    K = resolve_fractal(args, W)
    cfg.update(weights=W.to_json(), fractal=K.to_json(), l=args.l, samples=args.samples, vectors=args.vectors,
               strict=args.strict)
    if not 1 <= args.l <= W.d - 1:
        raise ValidationError(f"l must lie in 1..{W.d - 1}")
    est = tail_slope(args.l, K, count=args.samples, seed=args.seed, n_vectors=args.vectors, strict=args.strict)
    out = est.to_json()
    try:
        cf = zeta_closed_form(K, W)
        out["closed_form"] = {"bound": cf.bounds[args.l - 1], "case": cf.case}
    except SinglabError:
        out["closed_form"] = None
    return out, None


def cmd_eta(args, cfg):
    from .exponents import eta_optimize, zeta_closed_form
    from .weights import parse_number
    W = resolve_weights(args)
    K = resolve_fractal(args, W)
    src = args.from_zeta
    cfg.update(weights=W.to_json(), fractal=K.to_json(), from_zeta=src, strict=args.strict)
    if src in (None, "closed-form", "closed"):
        zeta = zeta_closed_form(K, W).bounds
    else:
        obj = load_json_arg(src, "zeta")
        if isinstance(obj, dict):
            obj = obj.get("zeta", obj.get("bounds"))
        if not isinstance(obj, list):
            raise ValidationError("zeta input must be a list or an object with a 'zeta' list")
        zeta = [parse_number(z) if not isinstance(z, dict) else parse_number(z["gamma_certified"]) for z in obj]
    profile = eta_optimize(zeta, W, strict=args.strict)
    out = profile.to_json()
    out["zeta"] = list(zeta)
    out["min_slack"] = profile.min_slack(zeta)
    return out, None


def cmd_trajectory(args, cfg):
    from .diophantine import geometric_times, parse_theta, trajectory
    W = resolve_weights(args)
    theta = parse_theta(load_json_arg(args.theta, "theta"), W.m, W.n)
    times = geometric_times(args.tmax, args.delta)
    grades = tuple(range(1, W.d))
    stats = trajectory(theta, W, times, grades=grades)
    cfg.update(weights=W.to_json(), theta=theta.tolist(), tmax=args.tmax, delta=args.delta)
    rows = stats.to_rows()
    header = ["time", "lambda1"] + [f"phi_{l}" for l in grades]
    return {"rows": rows, "columns": header}, (rows, header)


def cmd_dirichlet(args, cfg):
    from .diophantine import dirichlet_test, parse_theta
    W = resolve_weights(args)
    theta = parse_theta(load_json_arg(args.theta, "theta"), W.m, W.n)
    T, eps = parse_value(args.T), parse_value(args.eps)
    cfg.update(weights=W.to_json(), theta=theta.tolist(), T=T, eps=eps)
    kw = {} if args.budget is None else {"budget": int(args.budget)}
    wit = dirichlet_test(theta, W, T, eps, **kw)
    return {"found": wit is not None, "witness": None if wit is None else wit.to_json()}, None


def cmd_contraction(args, cfg):
    from .height import (contraction_check, make_config, measure_C_hat, measure_D, xi_estimate)
    from .lattice import Lattice
    W = resolve_weights(args)
    K = resolve_fractal(args, W)
    profile = resolve_profile(args.eta, K, W, strict=True)
    lat = load_json_arg(args.lattice, "lattice")
    L = Lattice.standard(W.d) if lat in (None, "standard") else (
        Lattice.from_json(lat) if isinstance(lat, dict) else Lattice.from_matrix(np.array(lat, dtype=float)))
    t_grid = [float(x) for x in parse_list(args.t_grid, "t-grid")] if args.t_grid else None
    C_hat = float(args.C_hat) if args.C_hat is not None else measure_C_hat(K, profile, seed=args.seed)
    D = float(args.D) if args.D is not None else measure_D(W.d, seed=args.seed)
    xi = xi_estimate(args.t, K, profile, D)
    hc = make_config(args.t, profile, C_hat, xi)
    hc.notes = {"C_hat": "given" if args.C_hat is not None else "measured",
                "D": D, "D_source": "given" if args.D is not None else "measured",
                "xi": "upper bound by construction"}
    cfg.update(weights=W.to_json(), fractal=K.to_json(), eta=args.eta or "closed", t=args.t, t_grid=t_grid,
               count=args.count, r=args.r)
    rep = contraction_check(L, args.t, hc, K, r=args.r, count=args.count, seed=args.seed, t_grid=t_grid)
    return rep, None


def cmd_boxcount(args, cfg):
    from .bounds import bound_sing
    from .boxcount import make_predicate, run_experiment
    from .exponents import closed_form_profile
    W = resolve_weights(args)
    K = resolve_fractal(args, W)
    pred = make_predicate(args.predicate, eps=args.eps, gamma=args.gamma)
    Ms = list(range(args.Mmin, args.Mmax + 1))
    try:
        ref = bound_sing(K, W, closed_form_profile(K, W))
    except SinglabError:
        ref = None
    kw = {} if args.budget is None else {"max_cells": int(args.budget)}
    exp = run_experiment(K, W, parse_value(args.t), Ms, pred, reference_bound=ref, threads=args.threads, **kw)
    cfg.update(weights=W.to_json(), fractal=K.to_json(), predicate=pred.name, params=pred.params(),
               t=args.t, M=Ms)
    return exp.to_json(), ([[r["M"], r["count"]] for r in exp.rows()], ["M", "count"])


def selftest_checks():
    from .bounds import bound_sing
    from .diophantine import dirichlet_test
    from .exponents import closed_form_profile
    from .fractal import ProductFractal, cell_count, covering_levels
    from .weights import equal_weights
    checks = {}
    W = equal_weights(2, 1)
    K = ProductFractal.uniform("unit_interval", 2, 1)
    checks["golden_bound"] = bound_sing(K, W, closed_form_profile(K, W)) == Fraction(4, 3)
    ok = True
    for m in (1, 2, 3):
        for n in (1, 2, 3):
            Wmn, Kmn = equal_weights(m, n), ProductFractal.uniform("unit_interval", m, n)
            ok &= bound_sing(Kmn, Wmn, closed_form_profile(Kmn, Wmn)) == m * n - Fraction(m * n, m + n)
    checks["unweighted_full_box"] = bool(ok)
    W1 = equal_weights(1, 1)
    checks["minkowski"] = all(dirichlet_test([[Fraction(k, 97)]], W1, 50, 1) is not None for k in range(1, 20))
    K1 = ProductFractal.uniform("unit_interval", 1, 1)
    checks["cell_count"] = cell_count(K1, covering_levels(K1, W1, 2, 5)) == 2**10
    return checks


def cmd_selftest(args, cfg):
    checks = selftest_checks()
    return {"checks": checks, "passed": all(checks.values())}, None


COMMANDS = {"bound": cmd_bound, "zeta": cmd_zeta, "eta": cmd_eta, "trajectory": cmd_trajectory,
            "dirichlet": cmd_dirichlet, "contraction": cmd_contraction, "boxcount": cmd_boxcount,
            "selftest": cmd_selftest}


# ---------------------------------------------------------------------------
# parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="64-bit master seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("--precision", choices=sorted(PRECISION_DPS), default="double",
                        help="working precision of the multiprecision paths")
    common.add_argument("--budget", type=float, default=None, help="enumeration budget override")
    common.add_argument("--csv", nargs="?", const="-", default=None, metavar="PATH",
                        help="write CSV rows to PATH, or to stdout instead of JSON when PATH is omitted")

    shape = argparse.ArgumentParser(add_help=False)
    shape.add_argument("--weights", help="JSON {\"a\": [...], \"b\": [...]} or a file containing it")
    shape.add_argument("--m", type=int, default=1, help="rows, for equal weights when --weights is absent")
    shape.add_argument("--n", type=int, default=1, help="columns, for equal weights when --weights is absent")

    frac = argparse.ArgumentParser(add_help=False)
    frac.add_argument("--fractal", help="preset name, IFS JSON, {\"grid\": ...} JSON, or a file")

    p = argparse.ArgumentParser(prog="singlab", description="Singular-matrix dimension bounds toolkit")
    p.add_argument("--version", action="version", version=f"singlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("bound", parents=[common, shape, frac], help="dimension bound report")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--p", help="divergence frequency in (0, 1]")
    g.add_argument("--omega", help="uniform exponent (>= 0, or inf)")
    g.add_argument("--gamma", help="phi_1 growth rate")
    s.add_argument("--eta", default="closed", help="closed | auto | JSON list | file")

    s = sub.add_parser("zeta", parents=[common, shape, frac], help="critical exponent estimate")
    s.add_argument("--l", type=int, default=1)
    s.add_argument("--samples", type=int, default=10**5)
    s.add_argument("--vectors", type=int, default=100)
    s.add_argument("--strict", action="store_true", help="fail instead of capping when the tail has no mass")

    s = sub.add_parser("eta", parents=[common, shape, frac], help="optimize the eta profile")
    s.add_argument("--from-zeta", default="closed-form", help="closed-form | JSON list | file")
    s.add_argument("--strict", action="store_true")

    s = sub.add_parser("trajectory", parents=[common, shape], help="lambda_1 and phi_l along the orbit")
    s.add_argument("--theta", required=True, help="JSON matrix, e.g. [[\"1/3\"]]")
    s.add_argument("--tmax", type=float, default=1e4)
    s.add_argument("--delta", type=float, default=math.log(2))

    s = sub.add_parser("dirichlet", parents=[common, shape], help="search for a Dirichlet witness")
    s.add_argument("--theta", required=True)
    s.add_argument("--T", required=True)
    s.add_argument("--eps", default="1")

    s = sub.add_parser("contraction", parents=[common, shape, frac], help="height-function contraction report")
    s.add_argument("--t", type=float, default=1e4)
    s.add_argument("--t-grid", help="JSON list of times for the decay fits")
    s.add_argument("--lattice", help="standard | JSON basis matrix | {\"basis\": ...}")
    s.add_argument("--eta", default="auto", help="closed | auto | JSON list | file (auto uses the strict optimizer)")
    s.add_argument("--C-hat", dest="C_hat", help="moment constant (measured when absent)")
    s.add_argument("--D", help="EMM constant (measured when absent)")
    s.add_argument("--count", type=int, default=2000)
    s.add_argument("--r", type=float, default=1.0)

    s = sub.add_parser("boxcount", parents=[common, shape, frac], help="surviving-cell covering experiment")
    s.add_argument("--predicate", default="dirichlet", choices=["always", "dirichlet", "phi1-growth"])
    s.add_argument("--eps", type=float, default=None)
    s.add_argument("--gamma", type=float, default=None)
    s.add_argument("--t", default="2")
    s.add_argument("--Mmin", type=int, default=1)
    s.add_argument("--Mmax", type=int, default=10)

    sub.add_parser("selftest", parents=[common], help="quick exact checks")
    return p


def run(argv=None, stdout=None, stderr=None):
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    # the thread count is left out on purpose: results never depend on it
    cfg = {"command": args.command, "seed": args.seed, "precision": args.precision,
           "budget": args.budget, "version": __version__}
    try:
        with mpmath.workdps(PRECISION_DPS[args.precision]):
            result, table = COMMANDS[args.command](args, cfg)
    except SinglabError as exc:
        err = exc.to_dict()
        err.update(schema=SCHEMA, exit_code=exc.exit_code, config=cfg)
        stderr.write(dumps(err) + "\n")
        return exc.exit_code if exc.exit_code in (2, 3) else 1
    if args.csv == "-" and table is not None:
        stdout.write(csv_text(*table))
        return 0
    if args.csv and table is not None:
        with open(args.csv, "w") as fh:
            fh.write(csv_text(*table))
    doc = {"schema": SCHEMA, "config": cfg}
    doc.update(result if isinstance(result, dict) else {"result": result})
    stdout.write(dumps(doc) + "\n")
    if args.command == "selftest" and not result["passed"]:
        return 1
    return 0


def main(argv=None):
    sys.exit(run(argv))
