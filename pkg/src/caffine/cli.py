"""Command line interface.

Every command writes one JSON document (to ``-o`` or standard output).
Exit codes: 0 success, 1 verification or classification mismatch, 2 invalid
input, 3 numerical failure.
"""

import argparse
import math
import os
import sys

import numpy as np

from . import calabi as cb
from . import catalog as cat
from .classify import ClassifyConfig, classify_point
from .errors import CaffineError, InvalidInput
from .geometry import (
    ImmersionChart,
    check_integrability,
    grid_points,
    invariants_at,
    verify_parallel,
)


# ---------------------------------------------------------------------------
# JSON output


def _num(x):
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return "null"
    if x == 0.0:
        return "0.0"
    if x == int(x) and abs(x) < 1e16:
        return format(x, ".1f")
    return format(x, ".17g")


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def dumps(obj, indent=2):
    """JSON text with floats written to 17 significant digits; NaN becomes null."""
    import json

    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if o is None:
            return "null"
        if isinstance(o, bool):
            return "true" if o else "false"
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return _num(o)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in o):
                return "[" + ", ".join(enc(v, level) for v in o) + "]"
            items = [pad + enc(v, level + 1) for v in o]
            return "[\n" + ",\n".join(items) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(_plain(obj), 0) + "\n"


def _emit(doc, path):
    text = dumps(doc)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# argument helpers


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidInput(message)


def _seed(args):
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("CAFFINE_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise InvalidInput(f"CAFFINE_SEED must be an integer, got {env!r}") from None
    return 0


def _load_chart(path):
    try:
        return ImmersionChart.load(path)
    except OSError as err:
        raise InvalidInput(f"cannot read chart file: {err}", location=path) from None


def _point(chart, text):
    if text is None:
        return chart.center
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise InvalidInput(f"cannot parse point {text!r}") from None
    pt = np.array(vals)
    if pt.shape != (chart.n,):
        raise InvalidInput(f"point needs {chart.n} coordinates, got {len(vals)}")
    if not chart.contains(pt):
        raise InvalidInput("point lies outside the chart domain", location=vals)
    return pt


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError("value must be positive")
        return v

    return conv


def _grid(text):
    v = _positive(int)(text)
    if v < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 points per axis")
    return v


def _jobs(args):
    return args.jobs if args.jobs else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# commands


def cmd_invariants(args):
    chart = _load_chart(args.chart)
    pt = _point(chart, args.point)
    d = invariants_at(chart, pt)
    report = {
        "chart": chart.name,
        "point": pt,
        "epsilon": d.epsilon,
        "signature": d.signature,
        "convex": d.convex,
        "h": d.h,
        "K": d.K,
        "C": d.C,
        "tchebychev": d.tcheb,
        "norm_C": d.norm_C(),
        "norm_traceless": d.frame.norm(d.traceless, "lll"),
        "norm_nablaC": d.norm_nablaC(),
        "residuals": check_integrability(d),
    }
    _emit(report, args.output)
    return 0


def cmd_verify(args):
    chart = _load_chart(args.chart)
    rep = verify_parallel(chart, args.grid, args.tol, jobs=_jobs(args))
    _emit(rep, args.output)
    return 0 if rep["pass"] else 1


def cmd_classify(args):
    chart = _load_chart(args.chart)
    pt = _point(chart, args.point)
    cfg = ClassifyConfig(
        restarts=args.restarts,
        seed=_seed(args),
        check_parallel=not args.skip_parallel_check,
    )
    rep = classify_point(chart, pt, cfg).to_dict()
    rep["chart"] = chart.name
    rep["point"] = pt
    rep["seed"] = cfg.seed
    code = 0
    if args.expect is not None:
        rep["expected_label"] = args.expect
        if rep["label"] != args.expect:
            code = 1
    elif rep["label"] == "Unrecognized":
        code = 1
    _emit(rep, args.output)
    return code


def cmd_calabi_compose(args):
    import json

    try:
        with open(args.spec, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as err:
        raise InvalidInput(f"cannot read spec file: {err}", location=args.spec) from None
    except json.JSONDecodeError as err:
        raise InvalidInput(f"spec file is not valid JSON: {err}", location=args.spec) from None
    spec = cb.CalabiSpec.from_dict(data, os.path.dirname(os.path.abspath(args.spec)))
    chart = cb.compose(spec)
    _emit(chart.to_dict(), args.output)
    return 0


def cmd_calabi_decompose(args):
    chart = _load_chart(args.chart)
    seed = _seed(args)
    pts = grid_points(chart, args.grid)
    psi1, psi2, structs = cb.decompose_grid(chart, pts, tol=args.tol, seed=seed)
    s0 = structs[0]
    report = {"chart": chart.name, "seed": seed, "structure": s0.to_dict(), "points": len(pts)}
    b1, r1 = cb.subspace_fit(psi1, s0.D2_dim + 1)
    report["psi1_fit_residual"] = r1
    report["psi1_dim"] = s0.D2_dim + 1
    if s0.kind == "two_factor":
        b2, r2 = cb.subspace_fit(psi2, s0.D3_dim + 1)
        report["psi2_fit_residual"] = r2
        report["psi2_dim"] = s0.D3_dim + 1
        report["principal_angles"] = cb.principal_angles(b1, b2)
        ok = max(r1, r2) <= 1e-6
    else:
        arr = np.array(psi2)
        spread = float(np.max(np.std(arr, axis=0)))
        report["psi2_spread"] = spread
        ok = r1 <= 1e-6 and spread <= 1e-8
    report["pass"] = ok
    _emit(report, args.output)
    return 0 if ok else 1


def _parse_value(text):
    import json

    try:
        return json.loads(text)
    except ValueError:
        return text


def cmd_catalog_list(args):
    entries = [e.to_dict() for e in cat.CATALOG.values()]
    _emit({"entries": entries}, args.output)
    return 0


def cmd_catalog_emit(args):
    entry = cat.get_entry(args.id)
    overrides = {}
    for item in args.params:
        if "=" not in item:
            raise InvalidInput(f"parameters are given as key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k] = _parse_value(v)
    try:
        chart = entry.build(**overrides)
    except TypeError as err:
        raise InvalidInput(f"bad parameters for {args.id}: {err}") from None
    _emit(chart.to_dict(), args.output)
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="caffine", description="Centroaffine invariants and classification.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, chart=True):
        if chart:
            sp.add_argument("--chart", required=True, help="chart JSON file")
        sp.add_argument("-o", "--output", help="report file (default: stdout)")

    sp = sub.add_parser("invariants", help="invariants at one chart point")
    common(sp)
    sp.add_argument("--point", help="comma separated coordinates (default: domain center)")
    sp.set_defaults(func=cmd_invariants)

    sp = sub.add_parser("verify", help="check parallel cubic form on a grid")
    common(sp)
    sp.add_argument("--grid", type=_grid, default=5)
    sp.add_argument("--tol", type=_positive(float), default=1e-8)
    sp.add_argument("--jobs", type=_positive(int), default=None)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("classify", help="classify at one chart point")
    common(sp)
    sp.add_argument("--point")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--restarts", type=_positive(int), default=32)
    sp.add_argument("--expect", help="expected label; mismatch exits with 1")
    sp.add_argument("--skip-parallel-check", action="store_true")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("calabi-compose", help="chart of a Calabi product")
    sp.add_argument("--spec", required=True, help="Calabi spec JSON file")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_calabi_compose)

    sp = sub.add_parser("calabi-decompose", help="detect and split a Calabi product")
    common(sp)
    sp.add_argument("--grid", type=_grid, default=3)
    sp.add_argument("--tol", type=_positive(float), default=1e-6)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_calabi_decompose)

    for name in ("catalog-list",):
        sp = sub.add_parser(name, help="list catalog entries")
        sp.add_argument("-o", "--output")
        sp.set_defaults(func=cmd_catalog_list)
    sp = sub.add_parser("catalog-emit", help="write a catalog chart")
    sp.add_argument("id")
    sp.add_argument("params", nargs="*", help="key=value overrides (values in JSON)")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_catalog_emit)

    sp = sub.add_parser("catalog", help="catalog list | catalog emit <id>")
    csub = sp.add_subparsers(dest="catalog_command", required=True, parser_class=_Parser)
    c = csub.add_parser("list")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_catalog_list)
    c = csub.add_parser("emit")
    c.add_argument("id")
    c.add_argument("params", nargs="*")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_catalog_emit)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CaffineError as err:
        doc = {"error": err.to_dict()}
        sys.stdout.write(dumps(doc))
        print(f"caffine: {type(err).__name__}: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
