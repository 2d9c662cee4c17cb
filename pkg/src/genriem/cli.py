"""Command-line interface: ``genriem eval|check|sugra|selftest``.

Exit codes: 0 success, 1 identity residual above tolerance (or a failed
self-test), 2 chart, geometry or usage error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import builtin, expr, gencurv
from .chart import ChartError, GeometryData, chart_hash, format_chart, parse_chart_file, FORMAT_VERSION
from .gencore import DilatonData, prolongation_check
from .oracle import block, finite_diff_audit, full_assembly, identity_suite, sample_points
from .riemannian import GeometryError, eval_point_geometry
from .sugra import nsns_residuals, vector_residuals

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
MUTATE_ENV = "GENRIEM_MUTATE"


# --------------------------------------------------------------------------
# Deterministic report text: JSON with sorted keys and %.17g floats
# --------------------------------------------------------------------------

def _scalar(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        if x == 0.0:
            x = 0.0  # drop the sign of zero
        return format(x, ".17g")
    if isinstance(x, str):
        import json
        return json.dumps(x, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{_scalar(str(k))}: {dumps(obj[k], indent + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_scalar(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    return _scalar(obj)


def write_report(report: dict, path: str | None) -> None:
    if path:
        Path(path).write_text(dumps(report) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# Argument helpers
# --------------------------------------------------------------------------

class UsageError(Exception):
    pass


def _parse_reals(text: str, what: str) -> list[float]:
    out = []
    for part in text.split(","):
        part = part.strip()
        try:
            out.append(expr.eval_value(expr.parse_expression(part), [], []))
        except (expr.ExprError, TypeError, ValueError) as exc:
            raise UsageError(f"cannot read {what} component {part!r}: {exc}") from None
    return out


def _load(spec: str):
    try:
        cf, name = builtin.load(spec)
    except FileNotFoundError:
        raise UsageError(f"chart {spec!r} is neither a built-in name ({', '.join(builtin.BUILTIN)}) nor a file") from None
    return cf, name


def _chart_block(cf, name) -> dict:
    gd = cf.geometry
    return {"name": name or "", "path": "" if name else (cf.path or ""), "hash": chart_hash(gd),
            "dim": gd.dim, "coords": list(gd.coords)}


def _point(gd: GeometryData, text: str) -> np.ndarray:
    x = _parse_reals(text, "point")
    if len(x) != gd.dim:
        raise UsageError(f"--at needs {gd.dim} components, got {len(x)}")
    return np.array(x)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_eval(args) -> int:
    cf, name = _load(args.chart)
    gd = cf.geometry
    x = _point(gd, args.at)
    pg = eval_point_geometry(gd, x)
    rep = gencurv.curvature_report(pg, DilatonData.from_point(pg))
    report = {
        "format_version": FORMAT_VERSION,
        "command": "eval",
        "chart": _chart_block(cf, name),
        "point": rep.point,
        "scalars": rep.scalars(),
        "tensors": {
            "rm_pure_plus": rep.rm_pure_plus, "rm_pure_minus": rep.rm_pure_minus,
            "rm_mixed_plus": rep.rm_mixed_plus, "rm_mixed_minus": rep.rm_mixed_minus,
            "full_ricci_plus": rep.full_ricci_plus, "full_ricci_minus": rep.full_ricci_minus,
            "ricci_plus": rep.ricci_plus, "ricci_minus": rep.ricci_minus,
            "classical_ricci": rep.classical_ricci,
        },
        "residuals": rep.residuals,
    }
    print(f"chart {name or cf.path}  point {', '.join(format(v, '.6g') for v in rep.point)}")
    for key, val in sorted(rep.scalars().items()):
        print(f"  {key:<12s} {val: .12g}")
    print(f"  worst closed-form vs oracle residual {max(rep.residuals.values()):.3e}")
    write_report(report, args.json)
    return EXIT_OK


def _suite_dict(rep) -> dict:
    worst = rep.worst()
    return {
        "n_points": rep.n_points, "seed": rep.seed, "box": list(rep.box), "centre": rep.centre,
        "tol": rep.tol, "passed": rep.passed,
        "residuals": {k: {"abs": r.abs, "rel": r.rel, "worst_point": r.worst_point}
                      for k, r in rep.residuals.items()},
        "worst": {"identity": worst[0], "abs": worst[1].abs, "point": worst[1].worst_point} if worst else {},
        "info": rep.info,
        "failures": rep.failures,
        "points": rep.points,
    }


def cmd_check(args) -> int:
    if args.points < 1:
        raise UsageError("--points must be at least 1")
    cf, name = _load(args.chart)
    gd = cf.geometry
    box = _parse_reals(args.box, "box")
    if len(box) != 2 or not box[0] < box[1]:
        raise UsageError("--box needs lo,hi with lo < hi")
    rep = identity_suite(gd, args.points, args.seed, (box[0], box[1]), args.tol, builtin.centre(name, gd.dim))
    report = {"format_version": FORMAT_VERSION, "command": "check",
              "chart": _chart_block(cf, name), **_suite_dict(rep)}
    write_report(report, args.json)
    for k, r in sorted(rep.residuals.items()):
        flag = "ok  " if r.abs < args.tol else "FAIL"
        print(f"{flag} {k:<28s} abs {r.abs:.3e}  rel {r.rel:.3e}")
    for f in rep.failures:
        print(f"error at {f['point']}: {f['error']}", file=sys.stderr)
    worst = rep.worst()
    if worst:
        print(f"worst: {worst[0]} = {worst[1].abs:.3e} at {worst[1].worst_point}")
    if rep.failures:
        return EXIT_ERROR
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_sugra(args) -> int:
    cf, name = _load(args.chart)
    gd = cf.geometry
    x = _point(gd, args.at)
    pg = eval_point_geometry(gd, x)
    report = {"format_version": FORMAT_VERSION, "command": "sugra", "mode": args.mode,
              "chart": _chart_block(cf, name), "point": [float(v) for v in x]}
    if args.mode == "nsns":
        if args.phi is None:
            raise UsageError("--mode nsns requires --phi")
        try:
            node = expr.parse_expression(args.phi, gd.symbols)
        except expr.ExprError as exc:
            raise UsageError(f"--phi: {exc}") from None
        phi = expr.eval_jet2(node, gd.coords, x, gd.params)
        res = nsns_residuals(pg, phi)
        report["phi"] = expr.pretty(node)
    else:
        res = vector_residuals(pg, DilatonData.from_point(pg))
        report["compatibility"] = res.compatibility
        report["compatible"] = res.compatible
    report.update({"symmetric": res.symmetric, "antisymmetric": res.antisymmetric,
                   "scalar": res.scalar, "trace_E": res.trace_E, "two_path": res.two_path})
    write_report(report, args.json)
    print(f"{args.mode} residuals at {', '.join(format(v, '.6g') for v in x)}")
    print(f"  scalar        {res.scalar: .12g}")
    print(f"  max |sym|     {np.abs(res.symmetric).max():.6g}")
    print(f"  max |antisym| {np.abs(res.antisymmetric).max():.6g}")
    print(f"  trace_E       {res.trace_E: .12g}")
    for k, v in sorted(res.compatibility.items()):
        print(f"  compat {k:<14s} {v:.3e}{'' if v < 1e-12 else '  (not compatible)'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Self-test
# --------------------------------------------------------------------------

def mutation_canaries(charts: Sequence[str] = builtin.ACCEPTANCE, n_points: int = 20, seed: int = 42,
                      box=(-0.4, 0.4), tol: float = 1e-8) -> dict[str, float]:
    """Worst pure/mixed theorem residual with each displayed coefficient flipped in turn."""
    cache = []
    for name in charts:
        gd = builtin.load(name)[0].geometry
        for x in sample_points(gd.dim, n_points, seed, box, builtin.centre(name, gd.dim)):
            pg = eval_point_geometry(gd, x)
            dd = DilatonData.from_point(pg)
            cache.append((pg, dd, full_assembly(pg, dd)))
    out = {}
    for coeff in gencurv.COEFFS:
        worst = 0.0
        with gencurv.mutate_coefficient(coeff):
            for pg, dd, R in cache:
                for s in (1, -1):
                    worst = max(worst,
                                float(np.abs(gencurv.rm_pure(pg, dd, s) - block(R, (s, s, s, s))).max()),
                                float(np.abs(gencurv.rm_mixed(pg, dd, s) - block(R, (s, -s, s, s))).max()))
        out[coeff] = worst
    return out


def run_selftest(seed: int = 42, n_points: int = 20, tol: float = 1e-8) -> dict:
    checks: dict[str, dict] = {}

    def record(name, passed, **detail):
        checks[name] = {"passed": bool(passed), **detail}

    for name in builtin.BUILTIN:
        cf, _ = builtin.load(name)
        gd = cf.geometry
        again = parse_chart_file(format_chart(gd))
        record(f"roundtrip_{name}", again == gd and format_chart(again) == format_chart(gd))
        audit = finite_diff_audit(gd, builtin.centre(name, gd.dim) if name == "G1"
                                  else [0.1 * (i + 1) for i in range(gd.dim)])
        record(f"jet_audit_{name}", audit["max_rel"] < 1e-6, max_rel=audit["max_rel"])
    for name in ("G4", "G5"):
        cf, _ = builtin.load(name)
        shipped = Path(cf.path).read_text(encoding="utf-8")
        record(f"generated_{name}", shipped == builtin.regenerate(name))

    for n in (2, 3, 4):
        for sig in ((n, 0), (n - 1, 1)):
            rep = prolongation_check(n, sig)
            record(f"prolongation_{n}_{sig[0]}{sig[1]}", rep["passed"],
                   dim_ker_cyclic=rep["dim_ker_cyclic"], dim_ker_trace=rep["dim_ker_trace"])

    for name in builtin.ACCEPTANCE + ("G5",):
        gd = builtin.load(name)[0].geometry
        rep = identity_suite(gd, n_points, seed, (-0.4, 0.4), tol, builtin.centre(name, gd.dim))
        worst = rep.worst()
        failed = sorted(k for k, r in rep.residuals.items() if r.abs >= tol)
        record(f"identities_{name}", rep.passed, worst_identity=worst[0] if worst else "",
               worst_abs=worst[1].abs if worst else 0.0, failed=failed, errors=len(rep.failures))

    for coeff, worst in mutation_canaries(n_points=n_points, seed=seed, tol=tol).items():
        record(f"canary_{coeff}", worst >= tol, residual_when_flipped=worst)

    return {"format_version": FORMAT_VERSION, "command": "selftest", "seed": seed,
            "passed": all(c["passed"] for c in checks.values()), "checks": checks}


def cmd_selftest(args) -> int:
    t0 = time.perf_counter()
    mutated = os.environ.get(MUTATE_ENV)
    if mutated:
        with gencurv.mutate_coefficient(mutated):
            report = run_selftest(args.seed)
    else:
        report = run_selftest(args.seed)
    write_report(report, args.json)
    for name, c in report["checks"].items():
        extra = ""
        if not c["passed"] and c.get("failed"):
            extra = f"  failed: {', '.join(c['failed'])}"
        print(f"{'ok  ' if c['passed'] else 'FAIL'} {name}{extra}")
    print(f"selftest {'passed' if report['passed'] else 'FAILED'} in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK if report["passed"] else EXIT_FAIL


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="genriem", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    chart_help = f"chart file path or built-in name ({', '.join(builtin.BUILTIN)})"

    e = sub.add_parser("eval", help="curvature report at one point")
    e.add_argument("chart", help=chart_help)
    e.add_argument("--at", required=True, help="comma-separated coordinates (expressions such as pi/4 allowed)")
    e.add_argument("--json", help="write the machine-readable report here")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("check", help="identity suite at pseudo-random points")
    c.add_argument("chart", help=chart_help)
    c.add_argument("--points", type=int, default=20)
    c.add_argument("--seed", type=int, default=42)
    c.add_argument("--box", default="-0.4,0.4", help="lo,hi offsets around the chart centre")
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--json")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("sugra", help="supergravity field-equation residuals")
    s.add_argument("chart", help=chart_help)
    s.add_argument("--mode", choices=("nsns", "vector"), required=True)
    s.add_argument("--at", required=True)
    s.add_argument("--phi", help="dilaton expression in the chart coordinates (nsns mode)")
    s.add_argument("--json")
    s.set_defaults(func=cmd_sugra)

    t = sub.add_parser("selftest", help="run the full built-in verification corpus")
    t.add_argument("--seed", type=int, default=42)
    t.add_argument("--json")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"genriem: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ChartError, GeometryError, expr.ExprError) as exc:
        print(f"genriem: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
