"""Command line: viz <kind> --in <paths> --out <path>."""
from __future__ import annotations

import argparse
import sys

from . import formats, plots

EXIT_OK = 0
EXIT_INVALID = 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="viz", description="Render solver output files into figures."
    )
    sub = ap.add_subparsers(dest="kind", required=True)

    p = sub.add_parser("stationary-shapes", help="overlay stationary profiles")
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="profile CSVs (x,h_s,h_w)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("decay", help="semilog energy decay with fitted rate")
    p.add_argument("--in", dest="inputs", nargs=1, required=True,
                   help="trajectory CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None,
                   help="diagnostics report JSON; overrides the local fit")
    p.add_argument("--window", nargs=2, type=float, default=None,
                   metavar=("T0", "T1"))

    p = sub.add_parser("evolution", help="surface snapshots over time")
    p.add_argument("--in", dest="inputs", nargs=1, required=True,
                   help="run summary JSON listing snapshots")
    p.add_argument("--out", required=True)
    p.add_argument("--max-curves", type=int, default=8)

    p = sub.add_parser("residuals", help="conservation and identity residuals")
    p.add_argument("--in", dest="inputs", nargs=1, required=True,
                   help="trajectory CSV")
    p.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.kind == "stationary-shapes":
            written = plots.plot_stationary_shapes(args.inputs, args.out)
        elif args.kind == "decay":
            window = tuple(args.window) if args.window else None
            written = plots.plot_decay(
                args.inputs[0], args.out, report_path=args.report, window=window
            )
        elif args.kind == "evolution":
            written = plots.plot_evolution(
                args.inputs[0], args.out, max_curves=args.max_curves
            )
        else:
            written = plots.plot_residuals(args.inputs[0], args.out)
    except (formats.FormatError, FileNotFoundError, ValueError) as exc:
        print(f"viz error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
