"""Command line interface: ``hierprox run|oracle|check|gallery``.

Exit codes: 0 ok, 1 validation error, 2 unsupported oracle, 3 diverged,
4 check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .exceptions import FitError, HierProxError, OracleUnsupported
from .problems import GALLERY_NAMES, gallery, problem_oracle, set_from_dict
from .schedules import classify_regime
from .solver import SolverConfig, solve
from .specfile import parse_spec
from .traceio import read_json, read_trace_csv, write_json, write_trace_csv

EXIT_OK, EXIT_INPUT, EXIT_ORACLE, EXIT_DIVERGED, EXIT_CHECK = 0, 1, 2, 3, 4
DEFAULT_MAX_ROWS = 10_000


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _load_spec(arg):
    """A problem file path, or a bare gallery name."""
    if not os.path.exists(arg) and arg in GALLERY_NAMES:
        return parse_spec({"gallery": arg})
    return parse_spec(read_json(arg, "problem file"))


def _report_path(out, report):
    if report:
        return report
    p = Path(out)
    return str(p.with_suffix("")) + ".run.json"


def _regime_warnings(rep):
    warn = []
    f = rep.assumption_flags
    if not f.get("assumption3", True):
        warn.append("assumption3 flag is false (alpha_k must tend to 0 with divergent sum, i.e. lam <= 1)")
    if rep.delta == "infinite" and not rep.delta_tilde_exists:
        warn.append("beta_k/alpha_k has limsup infinity but no limit")
    return warn


def _problem_description(spec):
    if spec.gallery_entry is not None:
        return {"gallery": spec.gallery_entry.name}
    return {k: v for k, v in spec.source.items() if k in ("dimension", "form", "layers")}


def cmd_run(args) -> int:
    try:
        spec = _load_spec(args.spec)
        opts = dict(spec.options)
        if args.iters is not None:
            opts["max_iters"] = args.iters
        if args.tol is not None:
            opts["stop_residual"] = args.tol
        if args.trace_every is not None:
            opts["trace_every"] = args.trace_every
        if args.backend:
            opts["backend"] = args.backend
        opts.setdefault("max_iters", 10_000)
        opts.setdefault("trace_every", max(1, int(opts["max_iters"]) // DEFAULT_MAX_ROWS))
        opts.setdefault("record_iterates", True)
        cfg = SolverConfig(spec.schedule, x0=spec.x0, **opts)
        regime = classify_regime(spec.schedule)
    except (HierProxError, ValueError, TypeError) as exc:
        _err(exc)
        return EXIT_INPUT
    for w in _regime_warnings(regime):
        print(f"warning: {w}; the run proceeds", file=sys.stderr)
    trace = solve(spec.problem, cfg)
    out = args.out or "trace.csv"
    write_trace_csv(trace, out)
    meta = {
        "problem": _problem_description(spec),
        "schedule": spec.schedule.to_dict(),
        "x0": spec.x0,
        "config": {"max_iters": cfg.max_iters, "stop_residual": cfg.stop_residual,
                   "trace_every": cfg.trace_every, "record_iterates": cfg.record_iterates,
                   "weight_family": cfg.weight_family, "divergence_radius": cfg.divergence_radius},
        "classification": regime.to_dict(),
        "status": trace.status,
        "last_k": trace.last_k,
        "x_final": trace.x_final,
        "final": {"res_W": trace.res_W[-1], "res_T": trace.res_T[-1], "step_norm": trace.step_norm[-1]},
        "backend": trace.meta.get("backend"),
        "trace_csv": out,
    }
    if spec.gallery_entry is not None and not spec.gallery_entry.diverges:
        e = spec.gallery_entry
        try:
            c = diag.bound_constants(e.problem, e.oracle_solution, spec.x0, schedule=spec.schedule)
            meta["constants"] = c.to_dict()
        except HierProxError as exc:
            meta["constants"] = {"error": str(exc)}
        meta["distance_to_oracle"] = float(np.linalg.norm(trace.x_final - e.oracle_solution))
    write_json(meta, _report_path(out, args.report))
    print(f"status={trace.status} k={trace.last_k} res_W={trace.res_W[-1]:.3e} "
          f"step={trace.step_norm[-1]:.3e}")
    return EXIT_DIVERGED if trace.status == "diverged" else EXIT_OK


def cmd_oracle(args) -> int:
    try:
        spec = _load_spec(args.spec)
    except HierProxError as exc:
        _err(exc)
        return EXIT_INPUT
    e = spec.gallery_entry
    try:
        if e is not None:
            if e.diverges:
                _err(f"{e.name}: no finite solution (the iterates diverge)")
                return EXIT_ORACLE
            res, name = e.oracle_result(), e.name
        else:
            res, name = problem_oracle(spec.problem), Path(args.spec).stem
    except OracleUnsupported as exc:
        _err(f"oracle unsupported: {exc}")
        return EXIT_ORACLE
    except HierProxError as exc:
        _err(exc)
        return EXIT_INPUT
    out = args.out or "oracle.json"
    write_json(res.to_dict(name), out)
    print("x_star = " + json.dumps([float(v) for v in res.x_star]))
    return EXIT_OK


def _run_meta_path(trace_path, run):
    if run:
        return run
    return str(Path(trace_path).with_suffix("")) + ".run.json"


def cmd_check(args) -> int:
    try:
        meta = read_json(_run_meta_path(args.trace, args.run), "run metadata")
        trace = read_trace_csv(args.trace, x0=meta.get("x0"), status=meta.get("status", "unknown"))
        oracle = read_json(args.oracle, "oracle file") if args.oracle else None
        spec = parse_spec(dict(meta["problem"], schedule=meta["schedule"], x0=meta["x0"]))
    except (HierProxError, KeyError) as exc:
        _err(exc if not isinstance(exc, KeyError) else f"run metadata: missing field {exc}")
        return EXIT_INPUT
    p, sched = spec.problem, spec.schedule
    report, ok = {"status": trace.status}, True
    regime = classify_regime(sched)
    report["regime"] = regime.to_dict()
    x_star = np.asarray(oracle["x_star"], dtype=np.float64) if oracle else None
    sets = [set_from_dict(s) for s in oracle.get("sets", [])] if oracle else []
    has_x = trace.x is not None

    if x_star is not None:
        try:
            consts = diag.bound_constants(p, x_star, spec.x0, schedule=sched)
        except HierProxError as exc:
            consts = None
            report["constants"] = {"error": str(exc)}
        if consts is not None:
            report["constants"] = consts.to_dict()
            if has_x and regime.delta != "infinite":
                b = diag.boundedness_check(trace, x_star, consts)
                report["boundedness"] = {"passed": b.passed, "max_violation": b.max_violation}
                ok &= b.passed
            if sched.kind == "rate":
                low = p.lowest
                phi2_star = float(low.objective(x_star))
                kw = {}
                if p.upper is not None and p.upper.kind == "proxgrad":
                    kw = {"t": p.upper.step, "phi1_star": float(p.upper.objective(x_star))}
                rb = diag.check_rate_bound(trace, consts, low.step, phi2_star, x_star=x_star, p=p, **kw)
                report["rate_bound"] = {
                    c.name: {"passed": c.passed, "max_violation": c.max_violation,
                             "conditional": c.conditional}
                    for c in (rb.phi2, rb.phi1, rb.omega) if c is not None}
                ok &= rb.passed
                sb = diag.step_bound_check(trace, consts)
                report["step_bound"] = {"passed": sb.passed, "max_violation": sb.max_violation}
                ok &= sb.passed
                fits = {}
                for name, series in (("phi2_gap", trace.phi2_z - phi2_star), ("step_norm", trace.step_norm),
                                     ("res_W", trace.res_W)):
                    try:
                        f = diag.rate_fit(trace.k, series, (args.fit_lo, args.fit_hi))
                        fits[name] = f._asdict()
                    except FitError as exc:
                        fits[name] = {"error": str(exc)}
                report["rate_fit"] = fits
                s2 = fits["phi2_gap"].get("slope")
                if s2 is not None:
                    fits["phi2_gap"]["passed"] = bool(s2 <= args.max_slope)
                    ok &= s2 <= args.max_slope
        if has_x:
            d = float(np.linalg.norm(trace.x[-1] - x_star))
            entry = {"final": d}
            if args.dist_tol is not None:
                entry.update(tol=args.dist_tol, passed=bool(d <= args.dist_tol))
                ok &= d <= args.dist_tol
            report["distance_to_oracle"] = entry
    if has_x and sets:
        ds_rep = []
        for i, s in enumerate(sets):
            ds = diag.distance_series(trace, s)
            ds_rep.append({"set": i, "fact_ok": ds.fact_ok, "final": float(ds.h[-1]),
                           "last_decade_median": ds.last_decade_median(),
                           "nonincreasing_after_burn_in": ds.nonincreasing_after()})
            ok &= ds.fact_ok
        report["distance_series"] = ds_rep
        fj = diag.fejer_check(trace, sets[-1])
        report["fejer"] = {"passed": fj.passed, "first_violation_k": fj.first_violation_k,
                           "informational": True}
        try:
            rg = diag.regularity_check(p, sets[0], samples=args.samples, seed=args.seed)
            report["regularity"] = rg.to_dict()
        except HierProxError as exc:
            report["regularity"] = {"error": str(exc)}
    report["passed"] = bool(ok)
    out = args.report or "check.json"
    write_json(report, out)
    print(f"checks {'passed' if ok else 'FAILED'}; report written to {out}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_gallery(args) -> int:
    if args.action == "list":
        for name in GALLERY_NAMES:
            print(name)
        return EXIT_OK
    if not args.name:
        _err("gallery describe: missing entry name")
        return EXIT_INPUT
    try:
        e = gallery(args.name)
    except KeyError as exc:
        _err(exc.args[0])
        return EXIT_INPUT
    d = dict(e.run_defaults)
    desc = {
        "name": e.name,
        "type": type(e.problem).__name__,
        "dimension": e.problem.dim,
        "oracle_solution": e.oracle_solution if e.diverges else list(map(float, e.oracle_solution)),
        "notes": e.notes,
        "run_defaults": {"schedule": d.pop("schedule").to_dict(), "x0": d.pop("x0").tolist(), **d},
    }
    print(json.dumps(desc, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hierprox", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run the iteration on a problem file or gallery name")
    r.add_argument("spec")
    r.add_argument("--iters", type=int)
    r.add_argument("--tol", type=float, help="stop when ||x^k - x^(k-1)|| <= tol")
    r.add_argument("--trace-every", type=int)
    r.add_argument("--out", help="trace CSV path (default trace.csv)")
    r.add_argument("--report", help="run metadata JSON path (default <out>.run.json)")
    r.add_argument("--backend", choices=("auto", "numba", "numpy"))
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="write the exact solution of a problem")
    o.add_argument("spec")
    o.add_argument("--out", help="oracle JSON path (default oracle.json)")
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("check", help="run diagnostics on a trace")
    c.add_argument("trace")
    c.add_argument("--oracle")
    c.add_argument("--run", help="run metadata JSON (default <trace>.run.json)")
    c.add_argument("--report", help="check report JSON path (default check.json)")
    c.add_argument("--seed", type=int, default=0, help="seed for regularity sampling")
    c.add_argument("--samples", type=int, default=2000)
    c.add_argument("--dist-tol", type=float,
                   help="require the final iterate within this distance of x* (reported only if absent)")
    c.add_argument("--max-slope", type=float, default=-0.9)
    c.add_argument("--fit-lo", type=float, default=1e2)
    c.add_argument("--fit-hi", type=float, default=1e4)
    c.set_defaults(func=cmd_check)

    g = sub.add_parser("gallery", help="list or describe gallery problems")
    g.add_argument("action", choices=("list", "describe"))
    g.add_argument("name", nargs="?")
    g.set_defaults(func=cmd_gallery)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
