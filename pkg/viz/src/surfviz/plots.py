"""Figure builders for the four plot kinds.

Everything renders through the Agg backend with pinned style options and
a fixed svg hash salt, so one input file maps to one byte sequence; the
only run-to-run variation allowed is the library version string the
writers embed.  Text in SVG output stays text (fonttype "none") so the
annotations are greppable.
"""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import formats

STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "svg.fonttype": "none",
    "svg.hashsalt": "surfviz",
}

FLAT_TOL = 1e-10


def second_difference_at_center(x: np.ndarray, h: np.ndarray) -> float:
    """Discrete second difference of h at the sample nearest x = 0."""
    i = int(np.argmin(np.abs(x)))
    i = min(max(i, 1), x.size - 2)
    return float(h[i - 1] - 2.0 * h[i] + h[i + 1])


def classify_shape(d2: float, tol: float = FLAT_TOL) -> str:
    if d2 < -tol:
        return "concave"
    if d2 > tol:
        return "convex"
    return "flat"


def _save(fig, out: str) -> list[str]:
    root, ext = os.path.splitext(out)
    targets = [out] if ext in (".png", ".svg") else [root + ".png", root + ".svg"]
    written = []
    for path in targets:
        if path.endswith(".svg"):
            fig.savefig(path, metadata={"Date": None})
        else:
            fig.savefig(path)
        written.append(path)
    plt.close(fig)
    return written


def plot_stationary_shapes(paths: list[str], out: str) -> list[str]:
    """Overlay stationary profiles; each legend entry carries its shape class."""
    profiles = [(os.path.basename(p), formats.read_profile(p)) for p in paths]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, cols in profiles:
            d2 = second_difference_at_center(cols["x"], cols["h_s"])
            label = f"{os.path.splitext(name)[0]} ({classify_shape(d2)})"
            ax.plot(cols["x"], cols["h_s"], label=label)
        wall = profiles[0][1]
        ax.plot(wall["x"], wall["h_w"], color="0.3", lw=1.8, label="vessel wall")
        ax.set_xlabel("x")
        ax.set_ylabel("height")
        ax.set_title("stationary surface shapes")
        ax.legend(loc="center")
        return _save(fig, out)


def _fit_tail(t: np.ndarray, e: np.ndarray, window=None):
    if window is None:
        window = (t[-1] / 2.0, t[-1])
    keep = (t >= window[0]) & (t <= window[1]) & (e > 0.0)
    if np.count_nonzero(keep) < 3:
        raise formats.FormatError("decay fit window holds fewer than 3 positive samples")
    tt, le = t[keep], np.log(e[keep])
    slope, intercept = np.polyfit(tt, le, 1)
    resid = le - (slope * tt + intercept)
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return -slope, r2, window, intercept


def plot_decay(traj_path: str, out: str, report_path: str | None = None,
               window=None) -> list[str]:
    """Semilog energy decay with the fitted rate annotated on the axes."""
    cols = formats.read_trajectory(traj_path, required=("t", "E_par"))
    t, e = cols["t"], cols["E_par"]
    fit_rate, r2, window, intercept = _fit_tail(t, e, window)
    rate = fit_rate
    if report_path is not None:
        rep = formats.read_summary(report_path).get("decay", {})
        if "lambda" in rep:
            rate = float(rep["lambda"])
            r2 = float(rep.get("r_squared", r2))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(t, e, lw=1.2, label="E_par")
        tw = np.linspace(window[0], window[1], 32)
        ax.semilogy(tw, np.exp(intercept - fit_rate * tw), "k--", lw=1.0, label="tail fit")
        ax.annotate(
            f"lambda = {rate:.4g}\nr^2 = {r2:.6f}",
            xy=(0.97, 0.95),
            xycoords="axes fraction",
            ha="right",
            va="top",
            bbox={"boxstyle": "round", "fc": "white", "ec": "0.6"},
        )
        ax.set_xlabel("t")
        ax.set_ylabel("parabolic energy")
        ax.set_title("energy decay")
        ax.legend(loc="lower left")
        return _save(fig, out)


def plot_evolution(summary_path: str, out: str, max_curves: int = 8) -> list[str]:
    """Surface perturbation at a spread of snapshot times."""
    snaps = []
    for jpath in formats.snapshot_paths(summary_path):
        t, nx, fields = formats.read_snapshot(jpath)
        if "eta" not in fields:
            raise formats.FormatError(f"{jpath}: snapshot lacks the eta field")
        snaps.append((t, nx, fields["eta"]))
    snaps.sort(key=lambda s: s[0])
    if len(snaps) > max_curves:
        idx = np.unique(np.linspace(0, len(snaps) - 1, max_curves).astype(int))
        snaps = [snaps[i] for i in idx]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        cmap = plt.get_cmap("viridis")
        tmax = max(s[0] for s in snaps) or 1.0
        for t, nx, eta in snaps:
            x = np.linspace(-1.0, 1.0, nx + 1)
            ax.plot(x, eta, color=cmap(t / tmax), lw=1.2, label=f"t = {t:g}")
        ax.set_xlabel("x")
        ax.set_ylabel("surface perturbation")
        ax.set_title("surface evolution")
        ax.legend(fontsize=8, ncol=2)
        return _save(fig, out)


def plot_residuals(traj_path: str, out: str) -> list[str]:
    """Conservation and identity residuals along one run."""
    cols = formats.read_trajectory(
        traj_path, required=("t", "mass", "residual_energy_identity")
    )
    t = cols["t"]
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.2))
        ax1.semilogy(t, np.abs(cols["residual_energy_identity"]) + 1e-300, lw=1.0)
        ax1.set_ylabel("|energy identity residual|")
        ax2.semilogy(t, np.abs(cols["mass"] - cols["mass"][0]) + 1e-300, lw=1.0)
        ax2.set_ylabel("|mass drift|")
        ax2.set_xlabel("t")
        fig.suptitle("run residuals")
        return _save(fig, out)
