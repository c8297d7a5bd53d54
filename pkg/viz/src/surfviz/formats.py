"""Readers for the solver's file formats.

Trajectory and profile data arrive as plain CSV with a header row and
17-significant-digit floats; snapshots as a JSON header next to a
little-endian float64 blob; run summaries as JSON.  Parse failures name
the offending file and line.
"""
from __future__ import annotations

import json
import os

import numpy as np


class FormatError(ValueError):
    """Input file does not follow the documented layout."""


def read_csv(path: str) -> dict[str, np.ndarray]:
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


def read_trajectory(path: str, required=("t",)) -> dict[str, np.ndarray]:
    """Time-series CSV; must carry at least one data row and the named columns."""
    cols = read_csv(path)
    missing = [name for name in required if name not in cols]
    if missing:
        raise FormatError(f"{path}: missing trajectory columns {missing}")
    if cols["t"].size == 0:
        raise FormatError(f"{path}: header only, no data rows")
    return cols


def read_profile(path: str) -> dict[str, np.ndarray]:
    """Stationary-shape CSV with columns x, h_s, h_w."""
    cols = read_csv(path)
    for name in ("x", "h_s", "h_w"):
        if name not in cols:
            raise FormatError(f"{path}: profile file lacks column {name!r}")
    if cols["x"].size < 3:
        raise FormatError(f"{path}: profile needs at least 3 samples")
    return cols


def read_summary(path: str) -> dict:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: summary must be a JSON object")
    return doc


def _field_size(name: str, nx: int, ny: int) -> int:
    if name == "eta":
        return nx + 1
    if name == "Phi":
        return (nx + 1) * (ny + 1)
    raise FormatError(f"unknown snapshot field {name!r}")


def read_snapshot(json_path: str) -> tuple[float, int, dict[str, np.ndarray]]:
    """One snapshot pair; returns (t, nx, fields)."""
    with open(json_path) as fh:
        try:
            header = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{json_path}: line {exc.lineno}: {exc.msg}") from exc
    for key in ("nx", "ny", "fields", "t"):
        if key not in header:
            raise FormatError(f"{json_path}: missing header key {key!r}")
    nx, ny = int(header["nx"]), int(header["ny"])
    bpath = os.path.splitext(json_path)[0] + ".bin"
    raw = np.fromfile(bpath, dtype="<f8")
    fields: dict[str, np.ndarray] = {}
    pos = 0
    for name in header["fields"]:
        size = _field_size(name, nx, ny)
        if pos + size > raw.size:
            raise FormatError(f"{bpath}: truncated, field {name!r} needs {size} values")
        fields[name] = raw[pos : pos + size].copy()
        pos += size
    if pos != raw.size:
        raise FormatError(f"{bpath}: {raw.size - pos} trailing values beyond the header")
    return float(header["t"]), nx, fields


def snapshot_paths(summary_path: str) -> list[str]:
    """JSON snapshot paths listed by a run summary, resolved next to it."""
    doc = read_summary(summary_path)
    names = doc.get("snapshots", [])
    if not names:
        raise FormatError(f"{summary_path}: summary lists no snapshots")
    base = os.path.dirname(os.path.abspath(summary_path))
    return [os.path.join(base, n) for n in names if n.endswith(".json")]
