"""Command-line front end.

Subcommands: stationary, simulate, diagnose, validate, scan-R.  Exit
codes: 0 success, 1 validation/config error, 2 runtime breakdown.  All
outputs are deterministic for a fixed config; CSV bodies are
byte-identical across runs.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import benchmarks, diagnostics, dynamics, io, stationary
from .config import ConfigError, load_config
from .elliptic import CompatibilityError, SolveError
from .diffeo import BreakdownError
from .stationary import GeometryError, ShootingError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BREAKDOWN = 2


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _solve_state(cfg):
    return stationary.solve_stationary(cfg.params, cfg.vessel, cfg.nx)


def cmd_stationary(args) -> int:
    cfg = load_config(args.config)
    state = _solve_state(cfg)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, f"{cfg.prefix}_stationary.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,h_s,h_w\n")
        for xi, hsi, hwi in zip(state.x, state.hs, state.vessel.hw):
            fh.write(io.format_row([xi, hsi, hwi]) + "\n")
    _write_json(
        os.path.join(args.out, f"{cfg.prefix}_stationary_summary.json"),
        {
            "phi_s": state.phi_s,
            "omega": state.omega,
            "mass_residual": state.mass_residual,
        },
    )
    print(f"stationary profile written to {csv_path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    state = _solve_state(cfg)
    eta0 = cfg.initial_eta(state.x)
    os.makedirs(args.out, exist_ok=True)
    result = dynamics.run(
        cfg.stepper,
        state,
        cfg.params,
        eta0,
        ny=cfg.ny,
        out_dir=args.out,
        prefix=cfg.prefix,
        config_echo=cfg.raw,
    )
    print(
        f"run {result.trajectory.summary['status']}: "
        f"{result.trajectory.summary['steps']} steps, "
        f"t_final={result.trajectory.summary['t_final']:.6g}"
    )
    if result.status != "completed":
        print(f"breakdown: {result.trajectory.summary['message']}", file=sys.stderr)
        return EXIT_BREAKDOWN
    return EXIT_OK


def cmd_diagnose(args) -> int:
    traj = io.load_trajectory(args.traj)
    if args.config:
        cfg = load_config(args.config)
        raw = cfg.raw
    else:
        raw = traj.summary.get("config")
        if raw is None:
            raise ConfigError(
                ["trajectory summary carries no config echo; pass --config"]
            )
        from .config import validate_config

        cfg = validate_config(raw)
    state = _solve_state(cfg)
    ana = diagnostics.Analyzer(state, cfg.ny, cfg.params, delta=cfg.delta)
    rep = ana.report(traj)
    if cfg.fit_window is not None and traj.columns["t"].size >= 8:
        try:
            fit = ana.decay(traj, "E_par", window=cfg.fit_window)
            rep["decay"] = {
                "quantity": "E_par",
                "lambda": fit.rate,
                "r_squared": fit.r_squared,
                "window": list(fit.window),
            }
        except ValueError as exc:
            rep["decay"] = {"error": str(exc)}
    out_dir = args.out or os.path.dirname(os.path.abspath(args.traj))
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, f"{cfg.prefix}_report.json")
    _write_json(report_path, rep)

    mt = ana.mean_trace_checks(traj)
    e_imp = ana.improved_energy(traj)
    d_imp = ana.improved_dissipation(traj)
    derived_path = os.path.join(out_dir, f"{cfg.prefix}_derived.csv")
    with open(derived_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,E_improved,D_improved,mean_trace_residual,potential_over_D_par\n")
        for k in range(len(traj.snapshots)):
            fh.write(
                io.format_row(
                    [
                        traj.snapshots[k][0],
                        e_imp[k],
                        d_imp[k],
                        mt["residual"][k],
                        mt["potential_over_D_par"][k],
                    ]
                )
                + "\n"
            )
    print(f"report written to {report_path}")
    return EXIT_OK


VALIDATE_THRESHOLDS = {
    "mixed": 1.9,
    "neumann": 1.9,
    "dn_symbol": 1.9,
}


def cmd_validate(args) -> int:
    if args.suite != "elliptic":
        print(f"unknown validation suite {args.suite!r}", file=sys.stderr)
        return EXIT_INVALID
    os.makedirs(args.out, exist_ok=True)
    rows = []
    ok = True
    suites = (
        ("mixed", benchmarks.mixed_convergence()),
        ("neumann", benchmarks.neumann_convergence()),
        ("dn_symbol", benchmarks.dn_symbol_convergence()),
    )
    for name, conv in suites:
        tail = [r.order for r in conv[1:]]
        measured = tail[-1]
        ok = ok and measured >= VALIDATE_THRESHOLDS[name]
        for r in conv:
            rows.append((name, r.n, r.error, r.order))
    csv_path = os.path.join(args.out, "elliptic_convergence.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("benchmark,N,L2_error,order\n")
        for name, n, err, order in rows:
            fh.write(f"{name},{n}," + io.format_row([err, order]) + "\n")
    print(f"convergence table written to {csv_path}")
    if not ok:
        print("convergence orders below threshold", file=sys.stderr)
    return EXIT_OK if ok else EXIT_INVALID


def cmd_scan(args) -> int:
    rep = diagnostics.remainder_ratio_scan(half_range=args.half_range, step=args.step)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "remainder_scan.json")
    _write_json(path, rep.as_dict())
    print(f"scan written to {path}; max drift {rep.max_drift:.3e}")
    if not np.all(np.isfinite(rep.suprema)):
        print("non-finite supremum in scan", file=sys.stderr)
        return EXIT_BREAKDOWN
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="muskat",
        description="Stationary meniscus, contact-line surface evolution, "
        "and energy-identity audits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stationary", help="solve the stationary profile only")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(fn=cmd_stationary)

    p = sub.add_parser("simulate", help="evolve the surface and record a trajectory")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("diagnose", help="recompute functionals from a trajectory")
    p.add_argument("--traj", required=True, help="trajectory CSV or summary JSON")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_diagnose)

    p = sub.add_parser("validate", help="run a convergence suite")
    p.add_argument("suite", choices=["elliptic"])
    p.add_argument("--out", default=".")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("scan-R", help="scan the remainder ratio bounds")
    p.add_argument("--half-range", type=float, default=5.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--out", default=".")
    p.set_defaults(fn=cmd_scan)
    return parser


def main(argv=None) -> int:
    if "MUSKAT_THREADS" in os.environ:
        os.environ.setdefault("OMP_NUM_THREADS", os.environ["MUSKAT_THREADS"])
        os.environ.setdefault("OPENBLAS_NUM_THREADS", os.environ["MUSKAT_THREADS"])
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        for line in exc.violations:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_INVALID
    except (io.FormatError, GeometryError, ShootingError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (BreakdownError, SolveError, CompatibilityError) as exc:
        print(f"breakdown: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN


if __name__ == "__main__":
    sys.exit(main())
