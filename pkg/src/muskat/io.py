"""Deterministic file formats: CSV time series and binary field snapshots.

Time series go to CSV with 17 significant digits so that a read-back
reproduces the doubles bit for bit.  Field snapshots are little-endian
float64 blobs next to a JSON header naming the payload; the header keys
are {nx, ny, fields, t} and the blob concatenates the fields in header
order.  Nothing here timestamps or randomizes, so two runs with the same
config produce byte-identical bodies.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .core import FloatArray

TRAJ_COLUMNS = (
    "t",
    "E_phys",
    "E_par",
    "frakE",
    "frakF",
    "D_par",
    "frakD",
    "eta_m1",
    "eta_p1",
    "dteta_m1",
    "dteta_p1",
    "mass",
    "residual_energy_identity",
)


class FormatError(ValueError):
    """Input file does not follow the documented layout."""


def format_row(values) -> str:
    return ",".join("%.17g" % float(v) for v in values)


def write_csv(path: str, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(format_row(row) + "\n")


def read_csv(path: str) -> dict[str, FloatArray]:
    with open(path, "r", newline="") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError(f"{path}: empty file, expected a header row")
    header = lines[0].split(",")
    data = np.empty((len(lines) - 1, len(header)))
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != len(header):
            raise FormatError(
                f"{path}: line {i + 2} has {len(parts)} fields, header has {len(header)}"
            )
        try:
            data[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise FormatError(f"{path}: line {i + 2}: {exc}") from exc
    return {name: data[:, k].copy() for k, name in enumerate(header)}


# -- snapshots ----------------------------------------------------------


def write_snapshot(dirpath: str, stem: str, t: float, nx: int, ny: int, fields: dict) -> str:
    """Write one snapshot pair <stem>.json / <stem>.bin, return the JSON path."""
    names = list(fields)
    header = {"nx": int(nx), "ny": int(ny), "fields": names, "t": float(t)}
    jpath = os.path.join(dirpath, stem + ".json")
    bpath = os.path.join(dirpath, stem + ".bin")
    with open(jpath, "w", newline="") as fh:
        json.dump(header, fh, sort_keys=True)
        fh.write("\n")
    with open(bpath, "wb") as fh:
        for name in names:
            arr = np.ascontiguousarray(fields[name], dtype="<f8")
            fh.write(arr.tobytes())
    return jpath


def _field_size(name: str, nx: int, ny: int) -> int:
    if name == "eta":
        return nx + 1
    if name == "Phi":
        return (nx + 1) * (ny + 1)
    raise FormatError(f"unknown snapshot field {name!r}")


def read_snapshot(json_path: str) -> tuple[float, dict[str, FloatArray]]:
    with open(json_path) as fh:
        header = json.load(fh)
    for key in ("nx", "ny", "fields", "t"):
        if key not in header:
            raise FormatError(f"{json_path}: missing header key {key!r}")
    nx, ny = int(header["nx"]), int(header["ny"])
    bpath = os.path.splitext(json_path)[0] + ".bin"
    raw = np.fromfile(bpath, dtype="<f8")
    fields: dict[str, FloatArray] = {}
    pos = 0
    for name in header["fields"]:
        size = _field_size(name, nx, ny)
        if pos + size > raw.size:
            raise FormatError(f"{bpath}: truncated, field {name!r} needs {size} values")
        fields[name] = raw[pos : pos + size].copy()
        pos += size
    if pos != raw.size:
        raise FormatError(f"{bpath}: {raw.size - pos} trailing values beyond the header")
    return float(header["t"]), fields


# -- trajectory bundle --------------------------------------------------


@dataclass
class Trajectory:
    """In-memory view of one run: scalar columns plus sparse field snapshots."""

    columns: dict[str, FloatArray]
    snapshots: list[tuple[float, FloatArray, FloatArray]] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def times(self) -> FloatArray:
        return self.columns["t"]


class TrajectoryWriter:
    """Streams finalized rows and snapshot pairs under one path prefix."""

    def __init__(self, out_dir: str, prefix: str = "run"):
        os.makedirs(out_dir, exist_ok=True)
        self.out_dir = out_dir
        self.prefix = prefix
        self.csv_path = os.path.join(out_dir, prefix + ".csv")
        self.summary_path = os.path.join(out_dir, prefix + "_summary.json")
        self.snapshot_paths: list[str] = []
        self._fh = open(self.csv_path, "w", newline="")
        self._fh.write(",".join(TRAJ_COLUMNS) + "\n")

    def row(self, values) -> None:
        self._fh.write(format_row(values) + "\n")

    def snapshot(self, index: int, t: float, nx: int, ny: int, fields: dict) -> None:
        stem = f"{self.prefix}_snap_{index:06d}"
        self.snapshot_paths.append(write_snapshot(self.out_dir, stem, t, nx, ny, fields))

    def close(self, summary: dict) -> None:
        self._fh.close()
        summary = dict(summary)
        summary["snapshots"] = [os.path.basename(p) for p in self.snapshot_paths]
        with open(self.summary_path, "w", newline="") as fh:
            json.dump(summary, fh, sort_keys=True, indent=1)
            fh.write("\n")


def load_trajectory(path: str) -> Trajectory:
    """Load a run from its summary JSON (or the CSV sitting next to it)."""
    if path.endswith(".csv"):
        summary_path = path[: -len(".csv")] + "_summary.json"
    else:
        summary_path = path
    with open(summary_path) as fh:
        summary = json.load(fh)
    base = os.path.dirname(summary_path)
    prefix = summary.get("prefix", "run")
    columns = read_csv(os.path.join(base, prefix + ".csv"))
    snapshots = []
    for name in summary.get("snapshots", []):
        t, fields = read_snapshot(os.path.join(base, name))
        snapshots.append((t, fields["eta"], fields["Phi"]))
    return Trajectory(columns=columns, snapshots=snapshots, summary=summary)
