"""Command-line front end: simulate, predict, reduce, certify, list-scenarios.

All numeric output is CSV at full decimal precision; run verdicts are
printed to stdout and duplicated in a trailing ``# summary:`` comment line
of the CSV so scripts can parse either.  Exit codes: 0 on a clean run, 1 on
a usage error, 2 when a run aborts on non-finite values.
"""

from __future__ import annotations

import argparse
import math
import sys as _sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import NonFiniteError
from .predictor import predict, rho
from .reduction import compute_B
from .scenarios import Scenario, get_scenario, list_scenarios
from .simulate import (LinearGainController, SimConfig, decay_check, simulate,
                       snap_step, summary_line, write_trace_csv)
from .systems import InputHistory

USAGE_ERROR = 1
NUMERIC_ERROR = 2


def _fmt(value):
    return format(float(value), ".17g")


def _parse_vector(text):
    try:
        return np.array([float(tok) for tok in text.split(",") if tok.strip() != ""])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated vector: {text!r}") from exc


def _parse_history_spec(text):
    """Constant value ("1" or "0.1,0.2") or semicolon-separated sample rows."""
    if ";" in text:
        return np.array([_parse_vector(row) for row in text.split(";") if row.strip()])
    vec = _parse_vector(text)
    return float(vec[0]) if vec.size == 1 else vec


def _load_scenario(args) -> Scenario:
    if getattr(args, "config", None):
        from .linref import load_linear_system
        from .feedback import LyapunovSpec, certificate as _certificate
        lin, extras = load_linear_system(args.config)
        sysd = lin.to_delay_system(name=extras.get("name") or "config")
        controller = None
        if "K" in extras:
            controller = LinearGainController(extras["K"])
        return Scenario(name=sysd.name, system=sysd, controller=controller,
                        linear=lin, V=extras.get("V"),
                        description="user-supplied linear plant")
    return get_scenario(args.scenario)


def _make_history(scn, args, n_cells):
    sysd = scn.system
    spec = _parse_history_spec(args.u0)
    if np.isscalar(spec):
        return InputHistory.constant(np.full(sysd.m, spec), sysd.h, n_cells)
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 1 and arr.size == sysd.m:
        return InputHistory.constant(arr, sysd.h, n_cells)
    if arr.ndim == 1:
        arr = arr[:, None]
    hist = InputHistory(arr, sysd.h)
    if hist.n_samples != n_cells and n_cells % hist.n_samples == 0:
        hist = hist.refine(n_cells // hist.n_samples)
    return hist


def _cmd_list_scenarios(_args):
    for name in list_scenarios():
        print(name)
    return 0


def _cmd_predict(args):
    scn = _load_scenario(args)
    sysd = scn.system
    n_cells, dt = snap_step(sysd.h, args.step)
    phi = _make_history(scn, args, n_cells)
    x0 = np.asarray(args.x0[0], dtype=float)
    result = predict(sysd, x0, phi, method=args.integrator)
    out = Path(args.out) if args.out else None
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            cols = ["s"] + [f"xi{i + 1}" for i in range(sysd.n)] + ["norm"]
            fh.write(",".join(cols) + "\n")
            for k, row in enumerate(result.xi):
                norm = math.sqrt(float(row @ row))
                fh.write(",".join([_fmt(k * dt)] + [_fmt(v) for v in row]
                                  + [_fmt(norm)]) + "\n")
    print("y " + " ".join(_fmt(v) for v in result.y))
    print(f"# summary: effective_step={_fmt(dt)} "
          f"left_ball={int(result.left_ball)} integrator={args.integrator}")
    return 0


def _cmd_reduce(args):
    scn = _load_scenario(args)
    sysd = scn.system
    n_cells, dt = snap_step(sysd.h, args.step)
    phi = _make_history(scn, args, n_cells)
    x0 = np.asarray(args.x0[0], dtype=float)
    pred = predict(sysd, x0, phi, method=args.integrator)
    red = compute_B(sysd, pred)
    lines = [",".join(_fmt(v) for v in row) for row in red.B]
    text = "\n".join(lines)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            header = ",".join(f"B{j + 1}" for j in range(sysd.m))
            fh.write(header + "\n" + text + "\n")
    print(text)
    print(f"# summary: effective_step={_fmt(dt)} "
          f"y={' '.join(_fmt(v) for v in red.y)}")
    return 0


def _cmd_certify(args):
    scn = _load_scenario(args)
    cert = scn.lk_certificate
    pc = rho(scn.system)
    status = dict(scn.certified_constants)
    rho_status = status.get("rho", "analytic" if pc.certified else "sampled estimate")
    print(f"rho {_fmt(pc.rho)} ({rho_status})")
    if cert is None:
        print("certificate: none registered for this scenario")
        return 0
    print(f"gamma {_fmt(cert.gamma)} ({status.get('m_w0', 'analytic')})")
    print(f"sigma {_fmt(cert.sigma)} ({status.get('m_w0', 'analytic')})")
    print(f"m_v {_fmt(cert.m_v)}")
    print(f"M_v {_fmt(cert.M_v)}")
    print(f"M_kappa {_fmt(cert.M_kappa)} ({status.get('M_kappa', 'analytic')})")
    radius = "inf" if math.isinf(cert.attraction_radius) else _fmt(cert.attraction_radius)
    print(f"attraction_radius {radius}")
    return 0


def _run_single_sim(scn, args, x0, out_path):
    cfg = SimConfig(
        dt=args.step, duration=args.duration, x0=x0,
        u0=_parse_history_spec(args.u0), integrator=args.integrator,
        record_y="y" in args.record, record_v="v" in args.record,
        record_b="B" in args.record, record_envelope="envelope" in args.record)
    trace = simulate(scn.system, scn.controller, cfg,
                     lyap=scn.lyapunov, cert=scn.lk_certificate)
    report = None
    if scn.lk_certificate is not None and not trace.aborted:
        report = decay_check(trace, scn.lk_certificate)
    if out_path is not None:
        write_trace_csv(trace, out_path, report)
    return trace, report


def _cmd_simulate(args):
    scn = _load_scenario(args)
    if scn.controller is None:
        print("error: scenario has no controller (config without gain K)",
              file=_sys.stderr)
        return USAGE_ERROR
    if ("v" in args.record or "envelope" in args.record) \
            and scn.lk_certificate is None:
        print("error: scenario has no certificate; cannot record v or envelope",
              file=_sys.stderr)
        return USAGE_ERROR
    inits = [np.asarray(v, dtype=float) for v in args.x0]
    base = Path(args.out) if args.out else None
    outs = []
    for i in range(len(inits)):
        if base is None:
            outs.append(None)
        elif len(inits) == 1:
            outs.append(base)
        else:
            outs.append(base.with_name(f"{base.stem}_{i}{base.suffix}"))
    if len(inits) == 1:
        results = [_run_single_sim(scn, args, inits[0], outs[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(inits)) as pool:
            results = list(pool.map(
                lambda pair: _run_single_sim(scn, args, pair[0], pair[1]),
                zip(inits, outs)))
    code = 0
    for (trace, report), x0 in zip(results, inits):
        print(f"x0=[{' '.join(_fmt(v) for v in x0)}] "
              + summary_line(trace, report)[2:])
        if trace.aborted:
            code = NUMERIC_ERROR
    return code


def build_parser():
    parser = argparse.ArgumentParser(
        prog="predfeed",
        description="predictor feedback for plants with distributed input delays")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_x0=True):
        p.add_argument("--scenario", default=None, help="registered scenario name")
        p.add_argument("--config", default=None,
                       help="JSON file describing a linear plant")
        if with_x0:
            p.add_argument("--x0", action="append", type=_parse_vector,
                           required=True, metavar="V1,V2,...",
                           help="initial state; repeat the flag for several runs")
        p.add_argument("--u0", default="0",
                       help="initial input history: constant value or "
                            "semicolon-separated samples")
        p.add_argument("--step", type=float, default=0.01,
                       help="requested time step (snapped to divide the delay)")
        p.add_argument("--integrator", choices=("euler", "rk4"), default="euler")
        p.add_argument("--out", default=None, help="output CSV path")

    p_sim = sub.add_parser("simulate", help="closed-loop run with CSV trace")
    add_common(p_sim)
    p_sim.add_argument("--duration", type=float, required=True)
    p_sim.add_argument("--record", type=lambda s: set(s.split(",")) - {""},
                       default=set(), metavar="y,v,B,envelope",
                       help="extra per-step records")
    p_sim.set_defaults(func=_cmd_simulate)

    p_pred = sub.add_parser("predict", help="prediction endpoint and profile")
    add_common(p_pred)
    p_pred.set_defaults(func=_cmd_predict)

    p_red = sub.add_parser("reduce", help="transformed input matrix")
    add_common(p_red)
    p_red.set_defaults(func=_cmd_reduce)

    p_cert = sub.add_parser("certify", help="closed-loop certificate constants")
    add_common(p_cert, with_x0=False)
    p_cert.set_defaults(func=_cmd_certify)

    p_list = sub.add_parser("list-scenarios", help="names of registered scenarios")
    p_list.set_defaults(func=_cmd_list_scenarios)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    if args.command not in ("list-scenarios",) \
            and not getattr(args, "config", None) and not args.scenario:
        print("error: either --scenario or --config is required", file=_sys.stderr)
        return USAGE_ERROR
    try:
        return args.func(args)
    except NonFiniteError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return NUMERIC_ERROR
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
