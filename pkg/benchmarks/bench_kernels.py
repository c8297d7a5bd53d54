"""Compare the compiled and pure-numpy variants of the two hot kernels.

The backend is chosen at import time from MUSKAT_NUMBA, so the script
re-executes itself once per backend and merges the reports.  Workloads
are the production shapes: mode tables from the harmonic-extension path
and cell tables from stiffness assembly.

Usage: python3 benchmarks/bench_kernels.py [--sizes 64,128,256]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _workloads(n, rng):
    from muskat import diffeo, elliptic
    from muskat.core import PhysParams, VesselGeometry, surface_grid
    from muskat.stationary import solve_stationary

    p = PhysParams(g=1.0, sigma=1.0, gamma_jump=0.0, mass=4.0)
    st = solve_stationary(p, VesselGeometry.from_callable(lambda x: -1.0 + 0.0 * x, n), n)
    mesh = elliptic.mesh_from_state(st, n // 2)

    eta = 0.01 * np.cos(np.pi * surface_grid(n))
    spec = diffeo.SpectralSurface.from_samples(*diffeo.extend(eta))
    E, C, S = diffeo._mesh_tables(mesh, spec)
    P = np.ascontiguousarray(spec.a * C + spec.b * S)
    Q = np.ascontiguousarray(spec.b * C - spec.a * S)
    layer_args = (E, P, Q, spec.zeta)

    conn = mesh.conn
    c00 = np.ascontiguousarray((1.0 + 0.1 * rng.standard_normal(mesh.nnodes))[conn])
    c01 = np.ascontiguousarray((0.1 * rng.standard_normal(mesh.nnodes))[conn])
    c11 = np.ascontiguousarray((1.0 + 0.1 * rng.standard_normal(mesh.nnodes))[conn])
    stiff_args = (mesh.SH, mesh.GX, mesh.GY, mesh.WQ, c00, c01, c11)

    label = f"{mesh.nx}x{mesh.ny} m={spec.zeta.size}"
    return layer_args, stiff_args, label


def _time(fn, args, repeat=5):
    fn(*args)  # warmup; also compiles the jit path
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def worker(sizes):
    from muskat import backend, kernels

    rng = np.random.default_rng(0)
    results = []
    for n in sizes:
        layer_args, stiff_args, label = _workloads(n, rng)
        results.append(
            {
                "size": label,
                "layer_eval_ms": _time(kernels.layer_eval, layer_args),
                "local_stiffness_ms": _time(kernels.local_stiffness, stiff_args),
            }
        )
    print(json.dumps({"backend": backend.backend_name(), "results": results}))


def orchestrate(sizes):
    reports = {}
    for flag in ("0", "1"):
        env = dict(os.environ, MUSKAT_NUMBA=flag)
        cmd = [
            sys.executable,
            os.path.abspath(__file__),
            "--worker",
            "--sizes",
            ",".join(str(s) for s in sizes),
        ]
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            if flag == "1":
                print("compiled backend unavailable; numpy timings only\n")
                continue
            sys.stderr.write(proc.stderr)
            raise SystemExit(proc.returncode)
        reports[flag] = json.loads(proc.stdout.strip().splitlines()[-1])

    base = reports["0"]["results"]
    fast = reports.get("1", {}).get("results")
    print(f"{'kernel':<18}{'size':<16}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for i, row in enumerate(base):
        for kernel in ("layer_eval", "local_stiffness"):
            a = row[f"{kernel}_ms"]
            if fast is None:
                print(f"{kernel:<18}{row['size']:<16}{a:>10.2f}{'-':>10}{'-':>9}")
            else:
                b = fast[i][f"{kernel}_ms"]
                print(
                    f"{kernel:<18}{row['size']:<16}{a:>10.2f}{b:>10.2f}"
                    f"{a / b:>8.1f}x"
                )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="64,128,256")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    if args.worker:
        worker(sizes)
    else:
        orchestrate(sizes)


if __name__ == "__main__":
    main()
