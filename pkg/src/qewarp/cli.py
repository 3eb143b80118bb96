"""Command-line front end.

Exit codes: 0 pass, 1 verification failure, 2 usage or specification error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis, catalog, flow
from .errors import BlowUp, ParamError, QEError, StepTooLarge

log = logging.getLogger("qewarp")

DEFAULT_TOL = {"closed": 1e-10, "oracle": 1e-5, "ode": 1e-6}
GATED = ("res_radial", "res_block", "trace", "gradR", "cotton")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def _load_spec(args) -> catalog.FamilySpec:
    text = ""
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    if args.param:
        if not text.lstrip().startswith("["):
            text = "[family]\n" + text
        extra = []
        for item in args.param:
            if "=" not in item:
                raise UsageError(f"--param expects key=value, got {item!r}")
            extra.append(item)
        text = text.rstrip("\n") + "\n" + "\n".join(extra) + "\n"
    if not text.strip():
        raise UsageError("need --config or --param")
    return catalog.FamilySpec.from_config(text)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return _jsonable(v.item())
    return v


def _params_doc(spec, g) -> dict:
    return {"kind": spec.kind, "input": {k: _jsonable(v) for k, v in spec.params.items()},
            "derived": {k: _jsonable(v) for k, v in g.meta.items()}}


def _parse_tols(items, defaults: dict) -> dict:
    tol = dict(defaults)
    for item in items or []:
        key, _, val = item.partition("=")
        try:
            tol[key] = float(val)
        except ValueError:
            raise UsageError(f"bad tolerance {item!r}") from None
        if not tol[key] > 0:
            raise UsageError("tolerances must be positive")
    return tol


def _write(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _oracle_job(args):
    spec, s, step, check = args
    g, p = spec.build(check_fiber2=check)
    return analysis.oracle_compare(g, p, s, step)


def _oracle_points(g, count: int) -> np.ndarray:
    a, b = g.sample_range
    return np.linspace(a, b, count + 2)[1:-1]


def _run_oracle(spec, g, count, step, jobs, check=True):
    pts = _oracle_points(g, count)
    work = [(spec, float(s), step, check) for s in pts]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_oracle_job, work))
    return [_oracle_job(w) for w in work]


# ---------------------------------------------------------------- commands


def cmd_catalog(args) -> int:
    entries = catalog.listing(args.kind)
    if args.json:
        _write(json.dumps(entries, indent=2), args.output)
    else:
        lines = []
        for e in entries:
            var = f" [{', '.join(map(str, e['variants']))}]" if e["variants"] else ""
            lines.append(f"{e['kind']}{var}: {e['anchor']}")
            lines.append(f"    keys: {', '.join(e['keys'])}")
        _write("\n".join(lines), args.output)
    return 0


def cmd_verify(args) -> int:
    spec = _load_spec(args)
    tol = _parse_tols(args.tol, {c: DEFAULT_TOL["closed"] for c in GATED + ("mu_spread",)}
                      | {"oracle": DEFAULT_TOL["oracle"]})
    if args.samples < 2:
        raise UsageError("--samples must be >= 2")
    g, p = spec.build(check_fiber2=False)
    rep = analysis.build_report(g, p, count=args.samples, params=_params_doc(spec, g))
    summ = rep.summary
    failures = []
    for col, val in summ.items():
        base = "res_block" if col.startswith("res_block") else col
        if base in GATED and not val <= tol[base]:
            failures.append(col)
    mu_scale = 1.0 + float(np.max(np.abs(rep.mu)))
    if not summ["mu_spread"] <= tol["mu_spread"] * mu_scale:
        failures.append("mu_spread")
    doc = json.loads(rep.to_json())
    doc["tolerances"] = tol
    if args.oracle:
        res = _run_oracle(spec, g, args.oracle_points, args.fd_step, args.jobs, check=False)
        doc["oracle"] = res
        for r in res:
            for key in ("ricci", "scalar", "cotton", "weyl", "d_norm"):
                if r.get(key) is not None and not r[key] <= tol["oracle"]:
                    failures.append(f"oracle:{key}@{r['s']:.6g}")
    doc["failures"] = failures
    doc["pass"] = not failures
    if args.format == "csv":
        _write(rep.to_csv(), args.output)
    else:
        _write(json.dumps(doc, indent=2), args.output)
    for f in failures:
        log.warning("residual above tolerance: %s", f)
    return 0 if not failures else 1


def _closed_form_errors(g, p, traj) -> dict:
    from . import smooth1d as S

    out = {}
    try:
        out["X_error"] = float(np.max(np.abs(traj.column("X") - S.d_log(g.blocks[0].h, traj.s))))
        out["fp_error"] = float(np.max(np.abs(traj.column("fp") - p.f.eval_jet(traj.s).d1)))
    except QEError:
        pass
    return out


def cmd_ode(args) -> int:
    spec = _load_spec(args)
    tol = _parse_tols(args.tol, {"drift": DEFAULT_TOL["ode"]})
    g, p = spec.build(check_fiber2=False)
    st0 = flow.state_from_family(g, p, args.s0)
    system = args.system
    if system == "auto":
        system = "two" if len(g.blocks) == 2 else "one"
    monitors = flow.on_shell_monitors(st0, system)
    summary = {"s0": args.s0, "s_end": args.s_end, "step": args.step, "system": system,
               "params": _params_doc(spec, g), "monitors": monitors}
    try:
        traj = flow.integrate(st0, args.s_end, args.step, monitors=monitors, system=system)
    except (BlowUp, StepTooLarge) as exc:
        summary["error"] = type(exc).__name__
        summary["detail"] = str(exc)
        if isinstance(exc, BlowUp) and exc.last_state is not None:
            ls = exc.last_state
            summary["last_state"] = {"s": ls.s, "fp": ls.fp, "X": ls.X, "Y": ls.Y, "h1": ls.h1, "h2": ls.h2}
        sys.stderr.write(json.dumps(summary, indent=2) + "\n")
        return 1
    drift = {k: traj.drift(k) for k in monitors}
    summary["drift"] = drift
    summary["off_shell"] = traj.off_shell
    summary.update(_closed_form_errors(g, p, traj))
    worst = max(drift.values(), default=0.0)
    summary["pass"] = worst <= tol["drift"]
    if args.output:
        _write(traj.to_csv(), args.output)
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return 0 if summary["pass"] else 1


def cmd_oracle(args) -> int:
    spec = _load_spec(args)
    tol = _parse_tols(args.tol, {"oracle": DEFAULT_TOL["oracle"]})
    g, p = spec.build(check_fiber2=False)
    res = _run_oracle(spec, g, args.points, args.fd_step, args.jobs, check=False)
    checks = []
    for s in _oracle_points(g, min(args.points, 2)):
        dc = analysis.d_cotton_weyl_check(g, p, float(s), step=args.fd_step)
        checks.append({"s": float(s), "resA": dc.resA, "resB": dc.resB, "surviving": dc.surviving(),
                       "d_norm": dc.d_norm, "weyl_grad_norm": dc.weyl_grad_norm})
    worst = max((v for r in res for k, v in r.items() if k != "s" and v is not None), default=0.0)
    doc = {"params": _params_doc(spec, g), "comparisons": res, "d_cotton_weyl": checks,
           "max_relative_difference": worst, "pass": worst <= tol["oracle"]}
    _write(json.dumps(doc, indent=2), args.output)
    return 0 if doc["pass"] else 1


def cmd_obstruction(args) -> int:
    if not args.m > 1:
        raise ParamError(f"obstruction needs m > 1, got {args.m}")
    rng = np.random.default_rng(args.seed)
    fp, xis, mults = flow.random_obstruction_states(args.count, args.m, rng)
    if args.zero:
        xis = np.zeros_like(xis)
        fp = np.zeros_like(fp)
    vals = [flow.three_eig_obstruction(args.m, fp[i], xis[i], mults[i]) for i in range(args.count)]
    doc = {"m": args.m, "count": args.count, "seed": args.seed, "min": float(min(vals)),
           "max": float(max(vals)), "pass": bool(min(vals) > 0)}
    _write(json.dumps(doc, indent=2), args.output)
    return 0 if doc["pass"] else 1


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qewarp", description="Verify warped quasi-Einstein families.")
    ap.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def family_opts(p):
        p.add_argument("--config", help="family config file (INI, [family] section)")
        p.add_argument("-p", "--param", action="append", metavar="KEY=VALUE", help="inline family parameter")
        p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="tolerance override")
        p.add_argument("-o", "--output", help="output path (default stdout)")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        p.add_argument("--fd-step", type=float, default=1e-2, help="finite-difference step scale")

    p = sub.add_parser("catalog", help="list family kinds")
    p.add_argument("--json", action="store_true")
    p.add_argument("--kind", help="only this kind")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("verify", help="run closed-form residual suite")
    family_opts(p)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--oracle", action="store_true", help="also cross-check with the chart oracle")
    p.add_argument("--oracle-points", type=int, default=3)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ode", help="integrate the flow from exact family data")
    family_opts(p)
    p.add_argument("--s0", type=float, required=True)
    p.add_argument("--s-end", type=float, required=True)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--system", choices=("auto", "two", "one"), default="auto")
    p.set_defaults(func=cmd_ode)

    p = sub.add_parser("oracle", help="chart-oracle cross-check")
    family_opts(p)
    p.add_argument("--points", type=int, default=3)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("obstruction", help="randomized three-eigenvalue obstruction")
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--zero", action="store_true", help="force all xi and f' to zero")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_obstruction)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "jobs", 1) < 1:
        sys.stderr.write("error: --jobs must be >= 1\n")
        return 2
    try:
        return args.func(args)
    except (UsageError, QEError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
