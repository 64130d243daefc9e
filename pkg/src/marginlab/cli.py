"""Command-line front end: ``marginlab {margins,sweep,verify,design}``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import ImproperLoop, InvalidPlant, MarginLabError, NotStabilizable, RootNotBracketed
from .margins import (
    gain_branch,
    lti_optimal_margins,
    margin_inequality_report,
    margins_for,
    optimal_gains,
    pid_gain_margin,
    pid_phase_margin,
    theta_hat,
    theta_tilde,
    omega_hat,
    omega_tilde,
)
from .oracle import DEFAULT, OracleConfig, best_margin_search, interior_gains
from .plant import ComplexPoles, FirstOrder, RealPoles, SecondOrderMinPhase, SecondOrderZero

EXIT_OK, EXIT_INPUT, EXIT_NOT_STABILIZABLE, EXIT_VERIFY = 0, 2, 3, 4
CSV_HEADER = ["z", "kM_pid", "kM_pid_db", "kM_lti_db", "theta_pid_deg", "theta_lti_deg", "branch", "stabilizable"]
POLE_NUDGE = 1e-9
CONTROLLERS = ("P", "PI", "PD", "PID")


class InputError(Exception):
    pass


# ------------------------------------------------------------------ config

def env_float(name, default):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise InputError(f"{name}={raw!r} is not a number")


def env_int(name, default):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        v = int(raw)
    except ValueError:
        raise InputError(f"{name}={raw!r} is not an integer")
    if v < 1:
        raise InputError(f"{name} must be at least 1")
    return v


def fmt(x):
    """Fixed CSV float formatting; empty for undefined, ``inf`` for infinite."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if x == math.inf:
        return "inf"
    return format(float(x), ".12g")


def _jsonable(x):
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return None
        return x
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


@dataclass
class RunManifest:
    command: str
    plant: dict
    config: dict
    tool_version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    content_hash: str = ""

    def seal(self, body: str):
        self.content_hash = "sha256:" + hashlib.sha256(body.encode()).hexdigest()
        return self


# ------------------------------------------------------------------ plants

def add_plant_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--first-order", action="store_true", help="(beta0 s + beta1)/(s - p)")
    g.add_argument("--second-order", action="store_true",
                   help="(s - z)/((s-p1)(s-p2)), or (beta0 s + beta1)/(...) when --beta1 is given")
    p.add_argument("--beta0", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--z", type=float)
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--nu", type=float)


def _poles(args):
    real = args.p1 is not None or args.p2 is not None
    cplx = args.sigma is not None or args.nu is not None
    if real == cplx:
        raise InputError("give either --p1/--p2 or --sigma/--nu")
    if real:
        if args.p1 is None or args.p2 is None:
            raise InputError("--p1 and --p2 are both required")
        return RealPoles(args.p1, args.p2)
    if args.sigma is None or args.nu is None:
        raise InputError("--sigma and --nu are both required")
    return ComplexPoles(args.sigma, args.nu)


def plant_from_args(args):
    try:
        if args.first_order:
            if args.beta0 is None or args.beta1 is None or args.p is None:
                raise InputError("--first-order needs --beta0 --beta1 --p")
            return FirstOrder(args.beta0, args.beta1, args.p)
        if args.second_order:
            poles = _poles(args)
            if args.beta1 is not None:
                return SecondOrderMinPhase(args.beta0 or 0.0, args.beta1, poles)
            if args.z is None:
                raise InputError("--second-order needs --z (or --beta1 for a minimum-phase plant)")
            return SecondOrderZero(args.z, poles)
    except InvalidPlant as exc:
        raise InputError(str(exc))
    raise InputError("choose --first-order or --second-order")


def plant_dict(plant):
    if isinstance(plant, FirstOrder):
        return {"type": "first-order", "beta0": plant.beta0, "beta1": plant.beta1, "p": plant.p}
    poles = plant.poles
    pd = ({"p1": poles.p1, "p2": poles.p2} if not poles.is_complex
          else {"sigma": poles.sigma, "nu": poles.nu})
    if isinstance(plant, SecondOrderMinPhase):
        return {"type": "second-order-min-phase", "beta0": plant.beta0, "beta1": plant.beta1, **pd}
    return {"type": "second-order", "z": plant.z, **pd}


def applicable_controllers(plant, requested):
    if requested and requested.lower() != "all":
        return [c.strip().upper() for c in requested.split(",")]
    return list(CONTROLLERS)


def _reports(plant, controller):
    """(gain, phase) reports, or an error string per report."""
    try:
        return margins_for(plant, controller), None
    except ImproperLoop as exc:
        return None, f"not applicable: {exc}"
    except RootNotBracketed as exc:
        if isinstance(plant, SecondOrderZero) and controller in ("PD", "PID"):
            return (pid_gain_margin(plant, controller), None), f"phase closed form undefined: {exc}"
        raise


# ----------------------------------------------------------------- margins

def _gains_text(g):
    if g is None:
        return ""
    return f"  gains (kp, ki, kd) = ({g.kp:.6g}, {g.ki:.6g}, {g.kd:.6g})"


def _report_text(r):
    if r is None:
        return "undefined"
    if r.value is None:
        return f"none ({r.details.get('reason', r.branch)})"
    if r.value == math.inf:
        unit = "inf dB"
        return f"{unit:>12}  [{r.branch}; {r.attainment}]{_gains_text(r.optimizing_gains)}"
    if r.kind == "gain":
        return f"{r.value:.6g} ({r.db:.4f} dB)  [{r.branch}; {r.attainment}]{_gains_text(r.optimizing_gains)}"
    return f"{r.value:.6g} rad ({r.degrees:.4f} deg)  [{r.branch}; {r.attainment}]{_gains_text(r.optimizing_gains)}"


def cmd_margins(args):
    plant = plant_from_args(args)
    results = {}
    errors = {}
    if isinstance(plant, SecondOrderZero):
        try:
            gain_branch(plant)
        except NotStabilizable as exc:
            _emit_failure(args, plant, str(exc))
            return EXIT_NOT_STABILIZABLE
    for c in applicable_controllers(plant, args.controller):
        try:
            reps, err = _reports(plant, c)
        except NotStabilizable as exc:
            _emit_failure(args, plant, str(exc))
            return EXIT_NOT_STABILIZABLE
        results[c] = reps
        if err:
            errors[c] = err
    try:
        lti = lti_optimal_margins(plant)
    except NotStabilizable as exc:
        _emit_failure(args, plant, str(exc))
        return EXIT_NOT_STABILIZABLE
    checks = margin_inequality_report(plant) if isinstance(plant, SecondOrderZero) else []

    if args.format == "json":
        doc = {
            "controllers": {c: None if r is None else {"gain": r[0].to_dict(),
                                                         "phase": None if r[1] is None else r[1].to_dict()}
                            for c, r in results.items()},
            "errors": errors,
            "lti": {"gain": lti[0].to_dict(), "phase": lti[1].to_dict()},
            "inequalities": [asdict(c) for c in checks],
        }
        _emit_json(args, plant, doc)
        return EXIT_OK
    out = [f"plant: {plant_dict(plant)}"]
    for c, r in results.items():
        out.append(f"{c}:")
        if r is None:
            out.append(f"  {errors[c]}")
            continue
        out.append(f"  gain margin   {_report_text(r[0])}")
        out.append(f"  phase margin  {_report_text(r[1]) if r[1] is not None else errors[c]}")
    out.append("LTI optimum:")
    out.append(f"  gain margin   {_report_text(lti[0])}")
    out.append(f"  phase margin  {_report_text(lti[1])}")
    if checks:
        out.append("inequalities:")
        for ch in checks:
            state = {True: "holds", False: "FAILS", None: "undefined"}[ch.holds]
            extra = "" if ch.condition is None else f" (sufficient condition {'met' if ch.condition else 'not met'})"
            out.append(f"  {ch.name:<26} {state:<9} [{ch.status}]{extra}")
    print("\n".join(out))
    return EXIT_OK


def _emit_json(args, plant, results):
    body = json.dumps(_jsonable(results), sort_keys=True)
    manifest = RunManifest(args.command, plant_dict(plant), _config_echo(args)).seal(body)
    print(json.dumps(_jsonable({"manifest": asdict(manifest), "results": results}), indent=2, sort_keys=True))


def _emit_failure(args, plant, reason):
    if getattr(args, "format", "text") == "json":
        _emit_json(args, plant, {"error": "not_stabilizable", "reason": reason})
    else:
        print(f"not stabilizable: {reason}")


def _config_echo(args):
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ------------------------------------------------------------------- sweep

def sweep_row(poles, z):
    """One SweepRow as a list of CSV fields."""
    exact_pole = not poles.is_complex and z in (poles.p1, poles.p2)
    zz = z + POLE_NUDGE if exact_pole else z
    plant = SecondOrderZero(zz, poles)
    try:
        gain = pid_gain_margin(plant)
    except NotStabilizable:
        return [fmt(z), "", "", "", "", "", "", "false"]
    try:
        theta = pid_phase_margin(plant)[0].value
    except RootNotBracketed:
        theta = None
    lg, lp = lti_optimal_margins(plant)
    return [fmt(z), fmt(gain.value), fmt(gain.db), fmt(lg.db), fmt(None if theta is None else math.degrees(theta)),
            fmt(lp.degrees), gain.branch, "false" if exact_pole else "true"]


def sweep_grid(z_min, z_max, points):
    return [float(z) for z in np.linspace(z_min, z_max, points)]


def sweep_rows(poles, grid, threads=1):
    if threads <= 1:
        return [sweep_row(poles, z) for z in grid]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda z: sweep_row(poles, z), grid))


def render_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def curve_rows(plant, which, points):
    z, S, P = plant.z, plant.S, plant.P
    ends = sorted((-1.0, P / z ** 2 - S / z)) if which == "theta-kd" else sorted((S - z, P / z))
    xs = np.linspace(ends[0], ends[1], points + 2)[1:-1]
    rows = []
    for x in xs:
        x = float(x)
        if which == "theta-kd":
            th, w = _safe(theta_tilde, plant, x), _safe(omega_tilde, plant, x)
        else:
            th, w = _safe(theta_hat, plant, x), _safe(omega_hat, plant, x)
        rows.append([fmt(x), fmt(th), fmt(w)])
    return rows


def _safe(f, *a):
    try:
        v = f(*a)
    except (ValueError, ZeroDivisionError, ArithmeticError):
        return None
    return None if (isinstance(v, float) and math.isnan(v)) else v


def cmd_sweep(args):
    try:
        poles = _poles(args)
    except InvalidPlant as exc:
        raise InputError(str(exc))
    threads = args.threads if args.threads is not None else env_int("MARGINLAB_THREADS", 1)
    if args.curve:
        if args.z is None:
            raise InputError("--curve needs --z")
        if args.points < 2:
            raise InputError("--points must be at least 2")
        try:
            plant = SecondOrderZero(args.z, poles)
        except InvalidPlant as exc:
            raise InputError(str(exc))
        name = "kd" if args.curve == "theta-kd" else "kp"
        header = [name, "theta_tilde" if name == "kd" else "theta_hat", "omega_tilde" if name == "kd" else "omega_hat"]
        rows = curve_rows(plant, args.curve, args.points)
        pdict = plant_dict(plant)
    else:
        if not args.z_min < args.z_max or args.points < 2 or args.z_min <= 0:
            raise InputError("need 0 < z-min < z-max and points >= 2")
        header, rows = CSV_HEADER, sweep_rows(poles, sweep_grid(args.z_min, args.z_max, args.points), threads)
        pdict = {"type": "second-order", **({"p1": poles.p1, "p2": poles.p2} if not poles.is_complex
                                            else {"sigma": poles.sigma, "nu": poles.nu})}
    body = render_csv(header, rows)
    if args.format == "json":
        doc = {"header": header, "rows": rows}
        manifest = RunManifest("sweep", pdict, _config_echo(args)).seal(body)
        text = json.dumps(_jsonable({"manifest": asdict(manifest), "results": doc}), indent=2, sort_keys=True) + "\n"
    else:
        text = body
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        if args.format != "json":
            manifest = RunManifest("sweep", pdict, _config_echo(args)).seal(body)
            with open(args.out + ".manifest.json", "w") as fh:
                json.dump(_jsonable(asdict(manifest)), fh, indent=2, sort_keys=True)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------------ verify

@dataclass
class VerifyRow:
    controller: str
    objective: str
    closed_form: object
    oracle: object
    gap: object
    status: str
    note: str = ""


def verify_rows(plant, controllers, tolerance, cfg: OracleConfig = DEFAULT, threads=1):
    jobs = []
    for c in controllers:
        for obj in ("gain", "phase"):
            jobs.append((c, obj))

    def run(job):
        c, obj = job
        idx = 0 if obj == "gain" else 1
        try:
            closed = margins_for(plant, c)[idx]
        except ImproperLoop as exc:
            return VerifyRow(c, obj, None, None, None, "skipped", f"not applicable: {exc}")
        except RootNotBracketed as exc:
            found = best_margin_search(plant, c, obj, cfg)
            return VerifyRow(c, obj, None, None if found is None else found.value, None, "error",
                             f"closed form undefined: {exc}")
        if closed.value is None:
            return VerifyRow(c, obj, None, None, None, "skipped", "no stabilizing controller in class")
        if closed.value == math.inf:
            return VerifyRow(c, obj, math.inf, None, None, "skipped", "infinite margin")
        found = best_margin_search(plant, c, obj, cfg)
        if found is None:
            return VerifyRow(c, obj, closed.value, None, None, "fail", "oracle found no stabilizing gains")
        gap = abs(found.value - closed.value) / abs(closed.value)
        return VerifyRow(c, obj, closed.value, found.value, gap, "pass" if gap <= tolerance else "fail")

    if threads <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, jobs))


def cmd_verify(args):
    plant = plant_from_args(args)
    tol = args.tolerance if args.tolerance is not None else env_float("MARGINLAB_TOLERANCE", 0.02)
    threads = args.threads if args.threads is not None else env_int("MARGINLAB_THREADS", 1)
    if isinstance(plant, SecondOrderZero):
        try:
            gain_branch(plant)
        except NotStabilizable as exc:
            _emit_failure(args, plant, str(exc))
            return EXIT_NOT_STABILIZABLE
    controllers = applicable_controllers(plant, args.controller or ("PID,PI" if isinstance(plant, SecondOrderZero) else "all"))
    rows = verify_rows(plant, controllers, tol, threads=threads)
    bad = [r for r in rows if r.status in ("fail", "error")]
    if args.format == "json":
        _emit_json(args, plant, {"tolerance": tol, "rows": [asdict(r) for r in rows], "ok": not bad})
    elif args.format == "csv":
        sys.stdout.write(render_csv(["controller", "objective", "closed_form", "oracle", "gap", "status", "note"],
                                    [[r.controller, r.objective, fmt(r.closed_form), fmt(r.oracle), fmt(r.gap),
                                      r.status, r.note] for r in rows]))
    else:
        print(f"{'ctrl':<5} {'margin':<6} {'closed form':>18} {'oracle':>18} {'gap':>18}  status")
        for r in rows:
            print(f"{r.controller:<5} {r.objective:<6} {fmt(r.closed_form):>18} {fmt(r.oracle):>18} "
                  f"{fmt(r.gap):>18}  {r.status}{'  ' + r.note if r.note else ''}")
        if bad:
            print("offenders: " + ", ".join(f"{r.controller}/{r.objective}" for r in bad))
    return EXIT_VERIFY if bad else EXIT_OK


# ------------------------------------------------------------------ design

def cmd_design(args):
    plant = plant_from_args(args)
    controller = args.controller.upper()
    try:
        reps = margins_for(plant, controller)
    except NotStabilizable as exc:
        _emit_failure(args, plant, str(exc))
        return EXIT_NOT_STABILIZABLE
    except ImproperLoop as exc:
        raise InputError(str(exc))
    except RootNotBracketed as exc:
        print(f"closed form undefined: {exc}")
        return EXIT_NOT_STABILIZABLE
    report = reps[0 if args.objective == "gain" else 1]
    if report.value is None:
        _emit_failure(args, plant, report.details.get("reason", "no stabilizing controller in class"))
        return EXIT_NOT_STABILIZABLE
    gains = optimal_gains(plant, controller, args.objective)
    interior, achieved = (None, None)
    if gains is not None:
        interior, achieved = interior_gains(plant, gains, args.objective, args.epsilon)
    found = best_margin_search(plant, controller, args.objective)
    doc = {
        "objective": args.objective,
        "controller": controller,
        "closed_form": report.to_dict(),
        "boundary_gains": None if gains is None else gains.as_tuple(),
        "attainment": report.attainment,
        "epsilon": args.epsilon,
        "interior_gains": None if interior is None else interior.as_tuple(),
        "interior_margin": achieved,
        "search_gains": None if found is None else found.gains.as_tuple(),
        "search_margin": None if found is None else found.value,
    }
    if args.format == "json":
        _emit_json(args, plant, doc)
        return EXIT_OK
    print(f"{controller} {args.objective} margin: {_report_text(report)}")
    print(f"boundary gains (kp, ki, kd): {_tuple(doc['boundary_gains'])}  [{report.attainment}]")
    if interior is None:
        print(f"interior gains (eps={args.epsilon:g}): none stabilizing near the boundary gains")
    else:
        print(f"interior gains (eps={args.epsilon:g}): {_tuple(doc['interior_gains'])}  achieves {achieved:.6g}")
    if found is not None:
        print(f"search-best gains: {_tuple(doc['search_gains'])}  achieves {found.value:.6g}")
    return EXIT_OK


def _tuple(t):
    return "none" if t is None else "(" + ", ".join(f"{float(x):.6g}" for x in t) + ")"


# -------------------------------------------------------------------- main

def build_parser():
    ap = argparse.ArgumentParser(prog="marginlab", description="PID gain and phase margin limits")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("margins", help="closed-form margins for one plant")
    add_plant_args(m)
    m.add_argument("--controller", default="all", help="comma list of P,PI,PD,PID or 'all'")
    m.add_argument("--format", choices=("text", "json"), default="text")
    m.set_defaults(func=cmd_margins)

    s = sub.add_parser("sweep", help="z-sweep CSV or optimal-gain curve dump")
    s.add_argument("--p1", type=float)
    s.add_argument("--p2", type=float)
    s.add_argument("--sigma", type=float)
    s.add_argument("--nu", type=float)
    s.add_argument("--z-min", type=float, default=0.5)
    s.add_argument("--z-max", type=float, default=8.0)
    s.add_argument("--points", type=int, default=151)
    s.add_argument("--z", type=float, help="zero location for --curve")
    s.add_argument("--curve", choices=("theta-kd", "theta-kp"))
    s.add_argument("--out")
    s.add_argument("--threads", type=int)
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="compare closed forms with the brute-force oracle")
    add_plant_args(v)
    v.add_argument("--controller", help="comma list of P,PI,PD,PID or 'all'")
    v.add_argument("--tolerance", type=float)
    v.add_argument("--threads", type=int)
    v.add_argument("--format", choices=("text", "json", "csv"), default="text")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("design", help="optimal gains and an interior realization")
    add_plant_args(d)
    d.add_argument("--objective", choices=("gain", "phase"), required=True)
    d.add_argument("--controller", default="PID", type=str.upper, choices=CONTROLLERS)
    d.add_argument("--epsilon", type=float, default=1e-4)
    d.add_argument("--format", choices=("text", "json"), default="text")
    d.set_defaults(func=cmd_design)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NotStabilizable as exc:
        print(f"not stabilizable: {exc}")
        return EXIT_NOT_STABILIZABLE
    except MarginLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
