"""Strict JSON run configuration.

One JSON document configures a run end to end.  Validation is strict in
both directions: unknown keys are rejected, and every violation in the
document is reported at once so a config can be fixed in one pass.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import PhysParams, VesselGeometry
from .dynamics import StepperConfig


class ConfigError(ValueError):
    """Carries every violation found in a config document."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


VESSEL_FAMILIES = ("flat", "parabolic", "cosine")
ETA_FAMILIES = ("cosine", "bump", "gauss")

_SCHEMA = {
    "params": {"g", "sigma", "gamma_jump", "mass"},
    "vessel": {"family", "depth", "coeff", "amplitude", "modes"},
    "grid": {"Nx", "Ny"},
    "stepper": {"dt", "t_end", "scheme", "dn_refresh"},
    "initial_eta": {"family", "amplitude", "modes", "width", "zero_mean"},
    "diagnostics": {"delta", "fit_window"},
    "output": {"prefix", "snapshot_stride"},
}

_DEFAULTS = {
    "params": {"g": 1.0, "sigma": 1.0, "gamma_jump": 0.0, "mass": 4.0},
    "vessel": {"family": "flat", "depth": 1.0, "coeff": 0.0,
               "amplitude": 0.0, "modes": 1},
    "grid": {"Nx": 64, "Ny": 32},
    "stepper": {"dt": 1e-3, "t_end": 1.0, "scheme": "semi-implicit",
                "dn_refresh": 1},
    "initial_eta": {"family": "cosine", "amplitude": 0.01, "modes": 1,
                    "width": 0.25, "zero_mean": True},
    "diagnostics": {"delta": 0.5, "fit_window": None},
    "output": {"prefix": "run", "snapshot_stride": 1},
}


@dataclass(frozen=True)
class SimConfig:
    params: PhysParams
    vessel: VesselGeometry
    nx: int
    ny: int
    stepper: StepperConfig
    eta_family: str
    eta_amplitude: float
    eta_modes: int
    eta_width: float
    eta_zero_mean: bool
    delta: float
    fit_window: tuple[float, float] | None
    prefix: str
    raw: dict = field(repr=False)

    def initial_eta(self, x: np.ndarray) -> np.ndarray:
        eta = initial_eta_profile(
            x, self.eta_family, self.eta_amplitude, self.eta_modes, self.eta_width
        )
        if self.eta_zero_mean:
            dx = x[1] - x[0]
            w = np.full(x.size, dx)
            w[0] = w[-1] = 0.5 * dx
            eta = eta - (w @ eta) / (w @ np.ones_like(x))
        return eta


def vessel_profile(family: str, depth: float, coeff: float,
                   amplitude: float, modes: int):
    if family == "flat":
        return lambda x: -depth * np.ones_like(x)
    if family == "parabolic":
        return lambda x: -depth + coeff * x**2
    return lambda x: -depth + amplitude * np.cos(modes * np.pi * x)


def initial_eta_profile(x, family: str, amplitude: float, modes: int,
                        width: float) -> np.ndarray:
    if family == "cosine":
        return amplitude * np.cos(modes * np.pi * x)
    if family == "bump":
        return amplitude * (1.0 - x**2) ** 2
    return amplitude * np.exp(-(x**2) / (2.0 * width**2))


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def validate_config(doc: dict) -> SimConfig:
    """Merge defaults, check every rule, raise ConfigError with all failures."""
    errs: list[str] = []
    if not isinstance(doc, dict):
        raise ConfigError(["config root must be a JSON object"])

    for key in doc:
        if key not in _SCHEMA:
            errs.append(f"unknown section {key!r}")
    merged: dict = {}
    for section, allowed in _SCHEMA.items():
        got = doc.get(section, {})
        if not isinstance(got, dict):
            errs.append(f"section {section!r} must be an object")
            got = {}
        for key in got:
            if key not in allowed:
                errs.append(f"unknown key {section}.{key}")
        merged[section] = {**_DEFAULTS[section], **{k: v for k, v in got.items() if k in allowed}}

    p = merged["params"]
    for name in ("g", "sigma", "mass"):
        if not (_is_num(p[name]) and p[name] > 0):
            errs.append(f"params.{name} must be a positive finite number")
    if not _is_num(p["gamma_jump"]):
        errs.append("params.gamma_jump must be a finite number")
    elif _is_num(p["sigma"]) and p["sigma"] > 0 and abs(p["gamma_jump"]) >= p["sigma"]:
        errs.append(
            "params.gamma_jump violates Young's law: partial wetting needs "
            f"|gamma_jump| < sigma, got |{p['gamma_jump']}| >= {p['sigma']}"
        )

    v = merged["vessel"]
    if v["family"] not in VESSEL_FAMILIES:
        errs.append(f"vessel.family must be one of {VESSEL_FAMILIES}, got {v['family']!r}")
    if not (_is_num(v["depth"]) and v["depth"] > 0):
        errs.append("vessel.depth must be a positive finite number")
    for name in ("coeff", "amplitude"):
        if not _is_num(v[name]):
            errs.append(f"vessel.{name} must be a finite number")
    if not (_is_int(v["modes"]) and v["modes"] >= 1):
        errs.append("vessel.modes must be an integer >= 1")

    gmap = merged["grid"]
    if not (_is_int(gmap["Nx"]) and gmap["Nx"] >= 8 and gmap["Nx"] % 2 == 0):
        errs.append(f"grid.Nx must be an even integer >= 8, got {gmap['Nx']!r}")
    if not (_is_int(gmap["Ny"]) and gmap["Ny"] >= 2):
        errs.append(f"grid.Ny must be an integer >= 2, got {gmap['Ny']!r}")

    st = merged["stepper"]
    if not (_is_num(st["dt"]) and st["dt"] > 0):
        errs.append("stepper.dt must be a positive finite number")
    if not (_is_num(st["t_end"]) and st["t_end"] >= 0):
        errs.append("stepper.t_end must be a nonnegative finite number")
    if st["scheme"] not in ("explicit", "semi-implicit"):
        errs.append(f"stepper.scheme must be 'explicit' or 'semi-implicit', got {st['scheme']!r}")
    if not (_is_int(st["dn_refresh"]) and st["dn_refresh"] >= 1):
        errs.append("stepper.dn_refresh must be an integer >= 1")

    e = merged["initial_eta"]
    if e["family"] not in ETA_FAMILIES:
        errs.append(f"initial_eta.family must be one of {ETA_FAMILIES}, got {e['family']!r}")
    if not _is_num(e["amplitude"]):
        errs.append("initial_eta.amplitude must be a finite number")
    if not (_is_int(e["modes"]) and e["modes"] >= 1):
        errs.append("initial_eta.modes must be an integer >= 1")
    if not (_is_num(e["width"]) and e["width"] > 0):
        errs.append("initial_eta.width must be a positive finite number")
    if not isinstance(e["zero_mean"], bool):
        errs.append("initial_eta.zero_mean must be a boolean")

    d = merged["diagnostics"]
    if not (_is_num(d["delta"]) and 0.0 < d["delta"] < 1.0):
        errs.append("diagnostics.delta must lie in (0, 1)")
    fw = d["fit_window"]
    if fw is not None:
        ok = (
            isinstance(fw, (list, tuple))
            and len(fw) == 2
            and all(_is_num(t) for t in fw)
            and fw[0] < fw[1]
        )
        if not ok:
            errs.append("diagnostics.fit_window must be null or [t0, t1] with t0 < t1")

    o = merged["output"]
    if not (isinstance(o["prefix"], str) and o["prefix"] and "/" not in o["prefix"]):
        errs.append("output.prefix must be a nonempty string without path separators")
    if not (_is_int(o["snapshot_stride"]) and o["snapshot_stride"] >= 1):
        errs.append("output.snapshot_stride must be an integer >= 1")

    if errs:
        raise ConfigError(errs)

    params = PhysParams(
        g=float(p["g"]), sigma=float(p["sigma"]),
        gamma_jump=float(p["gamma_jump"]), mass=float(p["mass"]),
    )
    profile = vessel_profile(
        v["family"], float(v["depth"]), float(v["coeff"]),
        float(v["amplitude"]), int(v["modes"]),
    )
    vessel = VesselGeometry.from_callable(profile, int(gmap["Nx"]))
    stepper = StepperConfig(
        dt=float(st["dt"]), t_end=float(st["t_end"]), scheme=st["scheme"],
        dn_refresh=int(st["dn_refresh"]),
        snapshot_stride=int(o["snapshot_stride"]),
    )
    return SimConfig(
        params=params,
        vessel=vessel,
        nx=int(gmap["Nx"]),
        ny=int(gmap["Ny"]),
        stepper=stepper,
        eta_family=e["family"],
        eta_amplitude=float(e["amplitude"]),
        eta_modes=int(e["modes"]),
        eta_width=float(e["width"]),
        eta_zero_mean=bool(e["zero_mean"]),
        delta=float(d["delta"]),
        fit_window=None if fw is None else (float(fw[0]), float(fw[1])),
        prefix=o["prefix"],
        raw=merged,
    )


def load_config(path: str) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    return validate_config(doc)
