"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 numerical failure. Reports are JSON, trajectories CSV. A JSON config file
(``--config``) supplies defaults; explicit flags override it. ``TTW_THREADS``
sets the worker count for ``scan``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analysis, dynamics, model, polyint

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

TRAJECTORY_HEADER = ["t", "r", "phi", "p_r", "p_phi", "E", "A", "ReC", "ImC"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str, count: int | None = None) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(values) != count:
        raise argparse.ArgumentTypeError(f"expected {count} numbers, got {len(values)}")
    return values


def _add_common(p: argparse.ArgumentParser, state=True, integrator=True):
    g = p.add_argument_group("model")
    g.add_argument("--omega", type=float, default=1.0, help="oscillator frequency")
    g.add_argument("--alpha", type=float, default=1.0, help="coupling of the cos^-2 wall")
    g.add_argument("--beta", type=float, default=2.0, help="coupling of the sin^-2 wall")
    g.add_argument("--k", default="1/1", help="m/n (rational mode) or a decimal (irrational mode)")
    if state:
        g = p.add_argument_group("initial state")
        g.add_argument("--state", type=lambda s: _floats(s, 4), default=None,
                       help="r,phi,p_r,p_phi (phi in radians); overrides --seed")
        g.add_argument("--seed", type=int, default=0, help="sampler seed when --state is absent")
        g.add_argument("--e-range", type=lambda s: _floats(s, 2), default=None,
                       help="sampler energy interval lo,hi (default 1.5x..3x the minimum energy)")
    if integrator:
        g = p.add_argument_group("integrator")
        g.add_argument("--scheme", choices=[s.value for s in dynamics.Scheme], default="adaptive_embedded",
                       help="time stepper")
        g.add_argument("--rel-tol", type=float, default=1e-10, help="adaptive relative tolerance")
        g.add_argument("--abs-tol", type=float, default=1e-12, help="adaptive absolute tolerance")
        g.add_argument("--dt", type=float, default=1e-3, help="step of the fixed-step scheme")
        g.add_argument("--max-steps", type=int, default=2_000_000, help="step budget")
    p.add_argument("--out", default=None, help="output file (stdout if omitted)")
    p.add_argument("--config", default=None, help="JSON file of defaults keyed by option name")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="ttwlab", description="TTW oscillator simulation and verification",
                     formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate and write a trajectory CSV", formatter_class=fmt)
    _add_common(p)
    p.add_argument("--t-end", type=float, default=math.pi / 2, help="integration time")

    p = sub.add_parser("invariants", help="drift report of the conserved quantities", formatter_class=fmt)
    _add_common(p)
    p.add_argument("--t-end", type=float, default=None, help="default 10 n pi/(2 omega)")
    p.add_argument("--threshold", type=float, default=1e-7, help="max relative drift of E, A, Re C, Im C")

    p = sub.add_parser("bracket", help="Poisson-bracket residuals at sampled states", formatter_class=fmt)
    _add_common(p, state=False, integrator=False)
    p.add_argument("--states", type=int, default=100, help="number of sampled states")
    p.add_argument("--seed", type=int, default=0, help="first sampler seed")
    p.add_argument("--e-range", type=lambda s: _floats(s, 2), default=None, help="sampler energy interval lo,hi")
    p.add_argument("--h-scale", type=float, default=1.0, help="multiplier of the finite-difference steps")
    p.add_argument("--threshold", type=float, default=1e-6, help="max normalized bracket residual")

    p = sub.add_parser("closure", help="orbit closure / recurrence report", formatter_class=fmt)
    _add_common(p)
    p.add_argument("--horizon", type=float, default=None, help="default n pi/(2 omega) + 0.5")
    p.add_argument("--tol", type=float, default=1e-6, help="recurrence distance tolerance")
    p.add_argument("--time-slack", type=float, default=1e-3, help="allowed lateness past n pi/(2 omega)")
    p.set_defaults(rel_tol=1e-12, abs_tol=1e-14)

    p = sub.add_parser("actions", help="action variables and energy round trip", formatter_class=fmt)
    _add_common(p, state=False, integrator=False)
    p.add_argument("--E", type=float, required=True, dest="E", help="energy")
    p.add_argument("--A", type=float, required=True, dest="A", help="angular integral")
    p.add_argument("--threshold", type=float, default=1e-12, help="max relative round-trip error")

    p = sub.add_parser("polyint", help="reduced polynomial integral and degree certificate",
                       formatter_class=fmt)
    _add_common(p, state=False, integrator=False)
    p.add_argument("--r", type=float, default=1.0, help="radius of the configuration point")
    p.add_argument("--phi", type=float, default=None, help="default 0.4 * pi/(2k)")
    p.add_argument("--spacing", type=float, default=0.5, help="momentum grid spacing")
    p.add_argument("--nodes", type=int, default=None, help="nodes per axis (default degree + 2)")
    p.add_argument("--residual-tol", type=float, default=1e-8, help="degree <= d certificate bound")
    p.add_argument("--top-tol", type=float, default=1e-4, help="degree == d certificate bound")

    p = sub.add_parser("scan", help="drift reports over seeds and k values", formatter_class=fmt)
    _add_common(p, state=False)
    p.add_argument("--k-values", default="1/1,2/1,3/1,1/2,3/2,5/2", help="comma-separated k list")
    p.add_argument("--seeds", type=int, default=4, help="seeds 0..N-1 per k")
    p.add_argument("--periods", type=float, default=10.0, help="horizon in units of n pi/(2 omega)")
    p.add_argument("--threshold", type=float, default=1e-7, help="max relative drift")
    p.add_argument("--e-range", type=lambda s: _floats(s, 2), default=None, help="sampler energy interval lo,hi")
    return parser


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        sub = _subparser(parser, args.command)
        known = {a.dest for a in sub._actions} - {"help", "config"}
        unknown = sorted(set(config) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        if "k" in config:
            config["k"] = str(config["k"])
        sub.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


# ------------------------------------------------------------------ helpers

def _params(args) -> model.ModelParameters:
    try:
        return model.ModelParameters.from_k_string(args.omega, args.alpha, args.beta, str(args.k))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _integrator(args) -> dynamics.IntegratorConfig:
    try:
        return dynamics.IntegratorConfig(scheme=args.scheme, rel_tol=args.rel_tol, abs_tol=args.abs_tol,
                                         dt=args.dt, max_steps=args.max_steps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _initial_state(args, params) -> model.PhaseState:
    if getattr(args, "state", None):
        state = model.PhaseState(*args.state)
        try:
            return model.check_state(params, state)
        except model.DomainError as exc:
            raise UsageError(str(exc)) from None
    return dynamics.sample_admissible_state(params, args.seed, args.e_range)


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _to_builtin(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, default=_to_builtin) + "\n"


def _state_dict(state: model.PhaseState) -> dict:
    return {"r": state.r, "phi": state.phi, "p_r": state.p_r, "p_phi": state.p_phi}


def _params_dict(params: model.ModelParameters) -> dict:
    return {"omega": params.omega, "alpha": params.alpha, "beta": params.beta, "k": params.k_label}


def _require_rational(params):
    if not params.is_rational:
        raise UsageError(f"k={params.k_label} is irrational: the superintegral is undefined")


# ------------------------------------------------------------------ commands

def trajectory_csv(traj: dynamics.Trajectory) -> str:
    params = traj.params
    cols = traj.columns()
    E = model.hamiltonian_fields(params, *cols)
    A = model.angular_integral_fields(params, *cols)
    if params.is_rational:
        C = model.superintegral_fields(params, *cols)
    else:
        C = np.full(len(traj), np.nan + 1j * np.nan)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_HEADER)
    for i in range(len(traj)):
        row = (traj.t[i], *traj.y[i], E[i], A[i], C[i].real, C[i].imag)
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def cmd_simulate(args) -> int:
    params = _params(args)
    state = _initial_state(args, params)
    traj = dynamics.integrate(params, state, args.t_end, _integrator(args))
    _emit(args, trajectory_csv(traj))
    return EXIT_OK


def _drift_run(params, state, t_end, config, threshold):
    traj = dynamics.integrate(params, state, t_end, config)
    report = analysis.drift_report(params, traj)
    checked = [n for n in ("E", "A", "ReC", "ImC") if n in report.names]
    worst = float(report.max_relative(checked))
    return report, worst, worst < threshold


def cmd_invariants(args) -> int:
    params = _params(args)
    state = _initial_state(args, params)
    n = params.k_den if params.is_rational else 1
    t_end = args.t_end if args.t_end is not None else 10 * n * math.pi / (2 * params.omega)
    report, worst, ok = _drift_run(params, state, t_end, _integrator(args), args.threshold)
    out = {"params": _params_dict(params), "initial_state": _state_dict(state), "t_end": t_end,
           **report.to_dict(), "max_relative_drift": worst, "threshold": args.threshold, "passed": ok}
    _emit(args, _json(out))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_bracket(args) -> int:
    params = _params(args)
    H = analysis.phase_function(params, "H")
    pairs = [("H_A", H, analysis.phase_function(params, "A"))]
    if params.is_rational:
        pairs += [("ReC_H", analysis.phase_function(params, "ReC"), H),
                  ("ImC_H", analysis.phase_function(params, "ImC"), H)]
    rows = []
    for seed in range(args.seed, args.seed + args.states):
        state = dynamics.sample_admissible_state(params, seed, args.e_range)
        row = {"seed": seed, **_state_dict(state)}
        for name, F, G in pairs:
            row[name] = analysis.poisson_bracket(F, G, state, args.h_scale, params).residual
        rows.append(row)
    worst = {name: max(r[name] for r in rows) for name, _, _ in pairs}
    ok = all(v < args.threshold for v in worst.values())
    _emit(args, _json({"params": _params_dict(params), "rows": rows, "max_residual": worst,
                       "threshold": args.threshold, "passed": ok}))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_closure(args) -> int:
    params = _params(args)
    state = _initial_state(args, params)
    n = params.k_den if params.is_rational else 1
    horizon = args.horizon if args.horizon is not None else n * math.pi / (2 * params.omega) + 0.5
    report = analysis.detect_closure(params, state, horizon, args.tol, _integrator(args))
    ok = True
    if params.is_rational and report.predicted_time + args.time_slack <= horizon:
        ok = report.recurrence_time is not None and report.recurrence_time <= report.predicted_time + args.time_slack
    _emit(args, _json({"params": _params_dict(params), "initial_state": _state_dict(state),
                       **report.to_dict(), "passed": ok}))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_actions(args) -> int:
    params = _params(args)
    try:
        actions = model.actions_from_invariants(params, args.E, args.A)
    except model.AdmissibilityError as exc:
        raise UsageError(str(exc)) from None
    E_back = model.energy_from_actions(params, actions)
    err = abs(E_back - args.E) / abs(args.E) if args.E else abs(E_back)
    ok = err < args.threshold
    report = model.admissibility(params, args.E, args.A)
    out = {"I1": actions.I1, "I2": actions.I2, "E_reconstructed": E_back, "relative_error": err,
           "admissibility": report._asdict(), "passed": ok}
    if args.out:
        _emit(args, _json(out))
    print(f"I1={actions.I1!r}\nI2={actions.I2!r}\nE_reconstructed={E_back!r}\nrelative_error={err!r}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_polyint(args) -> int:
    params = _params(args)
    _require_rational(params)
    phi = args.phi if args.phi is not None else 0.4 * params.sector_width
    degree = polyint.claimed_degree(params)
    nodes = args.nodes if args.nodes is not None else degree + 2
    grid = (polyint.momentum_nodes(nodes, args.spacing),) * 2
    try:
        table = polyint.extract_reduced_integral(params, (args.r, phi), grid)
        upper = polyint.verify_polynomial_degree(table, degree, args.residual_tol, args.top_tol)
        lower = polyint.verify_polynomial_degree(table, degree - 1, args.residual_tol, args.top_tol) \
            if degree > 0 else None
    except (model.DomainError, polyint.GridTooSmall, ValueError) as exc:
        if isinstance(exc, ArithmeticError):
            raise
        raise UsageError(str(exc)) from None
    ok = upper.exact and (lower is None or not lower.bounded)
    out = {"params": _params_dict(params), "config_point": list(table.config_point),
           "parity": table.parity, "claimed_degree": degree,
           "p_r": table.p_r.tolist(), "p_phi": table.p_phi.tolist(), "values": table.values.tolist(),
           "certificate": upper._asdict(), "lower_degree_check": lower._asdict() if lower else None,
           "passed": ok}
    _emit(args, _json(out))
    return EXIT_OK if ok else EXIT_VERIFY


def _scan_job(job):
    params, seed, args = job
    state = dynamics.sample_admissible_state(params, seed, args.e_range)
    n = params.k_den if params.is_rational else 1
    t_end = args.periods * n * math.pi / (2 * params.omega)
    report, worst, ok = _drift_run(params, state, t_end, _integrator(args), args.threshold)
    return {"k": params.k_label, "seed": seed, "t_end": t_end, "initial_state": _state_dict(state),
            "max_relative_drift": worst, "passed": ok, **report.to_dict()}


def thread_count() -> int:
    raw = os.environ.get("TTW_THREADS")
    if raw is None:
        return min(8, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"TTW_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise UsageError("TTW_THREADS must be positive")
    return value


def cmd_scan(args) -> int:
    jobs = []
    for k in args.k_values.split(","):
        try:
            params = model.ModelParameters.from_k_string(args.omega, args.alpha, args.beta, k)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        jobs += [(params, seed, args) for seed in range(args.seeds)]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(_scan_job, jobs))  # map preserves input order
    ok = all(r["passed"] for r in results)
    _emit(args, _json({"runs": results, "threshold": args.threshold, "passed": ok}))
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {
    "simulate": cmd_simulate,
    "invariants": cmd_invariants,
    "bracket": cmd_bracket,
    "closure": cmd_closure,
    "actions": cmd_actions,
    "polyint": cmd_polyint,
    "scan": cmd_scan,
}


def dispatch(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, model.ConfigurationError) as exc:
        print(f"ttwlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (dynamics.IntegrationError, dynamics.SamplingExhausted, model.DomainError,
            model.AdmissibilityError, ArithmeticError, analysis.DegenerateOrbit) as exc:
        print(f"ttwlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(dispatch())
