"""Command-line entry point: ``mtdc-droop <command> ...``.

Exit status is 0 on success, 1 for invalid input (including usage errors)
and 2 when the numerics fail. ``certify`` and ``bounds`` print a
``VERDICT:`` line that scripts can grep for.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import certify_stability, solve_equilibrium, theorem2_bounds
from .errors import AssumptionError, NumericalError, ValidationError
from .grid import build_laplacian
from .scenario_io import csv_rows, load_scenario, report_text, resolve_scenario_path
from .sim import Trajectory, settling_time, simulate

log = logging.getLogger("mtdc_droop")

FIGURES = {"freq": "omega", "gen": "pdroop", "inj": "pinj", "volt": "v"}
SWEEP_PARAMS = ("inertia", "capacitance", "k_omega", "k_droop", "k_v", "v_nom")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _load(args):
    return load_scenario(resolve_scenario_path(args.scenario), strict=not args.lax)


def _pm(scenario, values):
    if values is None:
        return scenario.disturbance.final
    pm = np.asarray(values, dtype=float)
    if pm.shape != (scenario.params.n,):
        raise ValidationError(f"--pm: expected {scenario.params.n} values, got {pm.size}")
    return pm


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    sc = _load(args)
    if args.model:
        sc = sc.replace(model=args.model)
    traj = simulate(sc)
    _emit(traj.to_csv(), args.out)
    t_settle = settling_time(sc, traj)
    log.info("%d samples, %d accepted steps, settled (|xdot| < 1e-8) at t = %g s",
             len(traj), traj.steps.accepted, t_settle)
    return 0


def cmd_equilibrium(args) -> int:
    sc = _load(args)
    pm = _pm(sc, args.pm)
    eq = solve_equilibrium(sc.params, build_laplacian(sc.topology), pm)
    doc = {"p_m": pm, "equilibrium": eq.to_dict()}
    sys.stdout.write(report_text(doc))
    return 0


def cmd_certify(args) -> int:
    sc = _load(args)
    rep = certify_stability(sc.params, build_laplacian(sc.topology))
    sys.stdout.write(report_text({"certificate": rep.to_dict()}))
    print(f"Q1 min eigenvalue: {rep.q1_eigenvalues[0]:.6e}")
    print(f"spectral abscissa: {rep.spectral_abscissa:.6e}")
    print("VERDICT: STABLE" if rep.stable else "VERDICT: UNSTABLE")
    return 0


def cmd_bounds(args) -> int:
    sc = _load(args)
    if sc.params.k_v_defaulted:
        raise ValidationError("bounds need an explicit params.k_v in the scenario file")
    pm = _pm(sc, args.pm)
    rep = theorem2_bounds(sc.params, build_laplacian(sc.topology), pm)
    sys.stdout.write(report_text({"p_m": pm, "bounds": rep.to_dict()}))
    print("VERDICT: BOUNDS_SATISFIED" if rep.all_satisfied else "VERDICT: BOUNDS_VIOLATED")
    return 0


def _sweep_point(sc, name, value, pm):
    params = sc.params
    if name == "v_nom":
        params = params.replace(v_nom=value)
    else:
        params = params.replace(**{name: np.full(params.n, value)})
    lap = build_laplacian(sc.topology)
    cert = certify_stability(params, lap)
    row = {name: value, "stable": cert.stable, "q1_min_eig": float(cert.q1_eigenvalues[0]),
           "spectral_abscissa": cert.spectral_abscissa}
    eq = solve_equilibrium(params, lap, pm)
    row.update(max_abs_omega_hat=float(np.max(np.abs(eq.omega_hat))),
               max_abs_v_hat=float(np.max(np.abs(eq.v_hat))), fairness=eq.fairness)
    try:
        b = theorem2_bounds(params, lap, pm)
    except AssumptionError:
        b = None
    for key in ("e_droop", "e_v", "e_omega"):
        row[key] = getattr(b, key) if b else None
    row["bounds_satisfied"] = b.all_satisfied if b else None
    return row


def cmd_sweep(args) -> int:
    sc = _load(args)
    if args.param not in SWEEP_PARAMS:
        raise ValidationError(f"--param must be one of {', '.join(SWEEP_PARAMS)}")
    if not args.values:
        raise ValidationError("--values: at least one value required")
    pm = sc.disturbance.final
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(lambda v: _sweep_point(sc, args.param, v, pm), args.values))
    _emit(csv_rows(rows), args.out)
    return 0


def cmd_plotdata(args) -> int:
    traj = Trajectory.from_csv(args.trajectory)
    prefix = FIGURES[args.figure]
    series = {"omega": traj.omega, "pdroop": traj.pdroop, "pinj": traj.pinj, "v": traj.voltage}[prefix]
    rows = [dict([("time", float(t))] + [(f"{prefix}_{i + 1}", float(y)) for i, y in enumerate(ys)])
            for t, ys in zip(traj.times, series)]
    text = csv_rows(rows) if rows else "time," + ",".join(f"{prefix}_{i + 1}" for i in range(traj.n)) + "\n"
    _emit(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mtdc-droop", description="Frequency reserve sharing over an MTDC grid.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    p.add_argument("--lax", action="store_true", help="warn instead of failing on unknown scenario keys")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("simulate", help="integrate a scenario and write the trajectory CSV")
    s.add_argument("scenario")
    s.add_argument("--out", help="output file (default: stdout)")
    s.add_argument("--model", choices=("linear", "nonlinear"))
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("equilibrium", help="steady state for a generation deviation")
    s.add_argument("scenario")
    s.add_argument("--pm", type=_floats, help="comma-separated P^m (default: final disturbance)")
    s.set_defaults(func=cmd_equilibrium)

    s = sub.add_parser("certify", help="Lyapunov certificate and spectrum of the closed loop")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("bounds", help="steady-state error bounds (uniform gains)")
    s.add_argument("scenario")
    s.add_argument("--pm", type=_floats)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("sweep", help="certificate, equilibrium and bounds over one parameter")
    s.add_argument("scenario")
    s.add_argument("--param", required=True)
    s.add_argument("--values", type=_floats, required=True)
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("plotdata", help="extract one figure's series from a trajectory CSV")
    s.add_argument("trajectory")
    s.add_argument("--figure", choices=sorted(FIGURES), required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_plotdata)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
