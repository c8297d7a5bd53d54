"""Energy bookkeeping along trajectories.

Everything here is post-processing: given surface and potential samples
at successive times, evaluate the energies, dissipations and identity
residuals that the evolution is supposed to satisfy, and fit decay
rates.  Time derivatives are reconstructed by finite differences over a
five-sample window (second order in the interior, one-sided at the run
edges), never by solving the time-differentiated elliptic systems; their
source fields enter only through the residual bookkeeping below.

The same RecordBuilder drives the in-run CSV rows and the offline
recomputation, so a re-analysis of a stride-1 trajectory reproduces the
run's columns to rounding.
"""
from __future__ import annotations

import math
from collections import OrderedDict, deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import diffeo, elliptic, io
from .core import (
    FloatArray,
    PhysParams,
    d1,
    d2,
    d2z2_R,
    d2z2dz1_R,
    d2z1_R,
    d3z2_R,
    dz1_R,
    dz1dz2_R,
    dz2_R,
    integral_R,
    remainder_R,
    residual_Q,
    source_calF,
)


def _weight(hs_slope: FloatArray) -> FloatArray:
    return (1.0 + hs_slope**2) ** -1.5


# -- finite-difference weights on arbitrary nodes -----------------------


def fd_weights(ts, tau: float, m: int) -> FloatArray:
    """Weights w with sum_i w_i f(t_i) ~ f^(m)(tau), Fornberg's recursion."""
    ts = np.asarray(ts, dtype=float)
    n = ts.size
    if n < m + 1:
        raise ValueError(f"order-{m} derivative needs at least {m + 1} samples")
    c = np.zeros((n, m + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = ts[0] - tau
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = ts[i] - tau
        for j in range(i):
            c3 = ts[i] - ts[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m].copy()


# -- pointwise functionals ----------------------------------------------


def physical_energy(h: FloatArray, params: PhysParams, dx: float) -> float:
    """Gravitational + wetting energy of a full surface h."""
    hp = d1(h, dx)
    W = np.full(h.size, dx)
    W[0] = W[-1] = 0.5 * dx
    bulk = W @ (0.5 * params.g * h**2 + params.sigma * np.sqrt(1.0 + hp**2))
    return float(bulk - params.gamma_jump * (h[0] + h[-1]))


def sobolev_norm_frac(f: FloatArray, s: float, dx: float | None = None) -> float:
    """H^s norm on [-1, 1]: stencil derivatives plus a Slobodeckij tail.

    The fractional seminorm uses the double integral over cell midpoints
    with the diagonal excluded, which is O(N^2) but needs no extension of
    f beyond the interval.
    """
    f = np.asarray(f, dtype=float)
    if not 0.0 < s < 3.0:
        raise ValueError(f"order must lie in (0, 3), got {s}")
    if dx is None:
        dx = 2.0 / (f.size - 1)
    k = int(math.floor(s))
    theta = s - k
    if theta == 0.0 and k == 0:
        # s in (0,1) always has a fractional part; s==0 rejected above
        raise ValueError("order 0 < s < 3 required")
    W = np.full(f.size, dx)
    W[0] = W[-1] = 0.5 * dx
    total = float(W @ f**2)
    g = f
    if k >= 1:
        g = d1(f, dx)
        total += float(W @ g**2)
    if k >= 2:
        g = d2(f, dx)
        total += float(W @ g**2)
    if theta > 0.0:
        gm = 0.5 * (g[:-1] + g[1:])
        cm = -1.0 + dx * (np.arange(gm.size) + 0.5)
        acc = 0.0
        step = 256
        for lo in range(0, gm.size, step):
            hi = min(lo + step, gm.size)
            diff = gm[lo:hi, None] - gm[None, :]
            dist = np.abs(cm[lo:hi, None] - cm[None, :])
            np.fill_diagonal(dist[:, lo:hi], 1.0)
            kern = diff**2 / dist ** (1.0 + 2.0 * theta)
            np.fill_diagonal(kern[:, lo:hi], 0.0)
            acc += float(kern.sum())
        total += acc * dx * dx
    return math.sqrt(total)


# -- scan of the uniform remainder bounds --------------------------------

RATIO_NAMES = (
    "intR/z2^3",
    "R/z2^2",
    "dz2R/z2",
    "dz1R/z2^2",
    "d2z2R",
    "d2z1R/z2^2",
    "dz1dz2R/z2",
    "d3z2R",
    "d2z2dz1R",
)


@dataclass(frozen=True)
class ScanReport:
    half_range: float
    step: float
    suprema: FloatArray
    suprema_refined: FloatArray
    max_drift: float
    stable: bool

    def as_dict(self) -> dict:
        return {
            "half_range": self.half_range,
            "step": self.step,
            "ratios": {
                name: {"sup": float(a), "sup_refined": float(b)}
                for name, a, b in zip(
                    RATIO_NAMES, self.suprema, self.suprema_refined
                )
            },
            "max_drift": self.max_drift,
            "stable": self.stable,
        }


def _scan_suprema(half_range: float, step: float) -> FloatArray:
    n = int(round(2.0 * half_range / step)) + 1
    z = np.linspace(-half_range, half_range, n)
    sups = np.zeros(len(RATIO_NAMES))
    with np.errstate(divide="ignore", invalid="ignore"):
        for lo in range(0, n, 128):
            z1 = z[lo : lo + 128, None]
            z2 = z[None, :]
            z2sq = z2 * z2
            vals = (
                integral_R(z1, z2) / (z2sq * z2),
                remainder_R(z1, z2) / z2sq,
                dz2_R(z1, z2) / z2,
                dz1_R(z1, z2) / z2sq,
                d2z2_R(z1, z2) + 0.0 * z1,
                d2z1_R(z1, z2) / z2sq,
                dz1dz2_R(z1, z2) / z2,
                d3z2_R(z1, z2) + 0.0 * z1,
                d2z2dz1_R(z1, z2) + 0.0 * z1,
            )
            for k, v in enumerate(vals):
                sups[k] = max(sups[k], float(np.nanmax(np.abs(v))))
    return sups


def remainder_ratio_scan(half_range: float = 5.0, step: float = 0.01) -> ScanReport:
    """Sampled suprema of the nine uniform remainder ratios."""
    if step <= 0:
        raise ValueError("step must be positive")
    sups = _scan_suprema(half_range, step)
    refined = _scan_suprema(half_range, 0.5 * step)
    drift = float(np.max(np.abs(refined - sups) / np.maximum(sups, 1e-300)))
    return ScanReport(
        half_range=half_range,
        step=step,
        suprema=sups,
        suprema_refined=refined,
        max_drift=drift,
        stable=bool(drift < 0.01),
    )


# -- decay fits ----------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    window: tuple[float, float]


def decay_fit(times, values, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares exponential rate on the tail of a positive series."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (0.5 * times[-1], times[-1])
    mask = (times >= window[0]) & (times <= window[1])
    if mask.sum() < 3:
        raise ValueError("fit window holds fewer than 3 samples")
    y = values[mask]
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("fit refused: nonpositive values inside the window")
    t = times[mask]
    logy = np.log(y)
    slope, intercept = np.polyfit(t, logy, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((logy - fitted) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 and ss_res < 1e-28 else 1.0 - ss_res / ss_tot
    return DecayFit(rate=float(-slope), r_squared=float(r2), window=window)


# -- per-record assembly --------------------------------------------------


@dataclass(frozen=True)
class EnergyBreakdown:
    E_phys: float
    E_par: float
    E_improved: float
    frakE: float
    frakF: float
    per_j_energy: tuple
    per_j_frak: tuple


@dataclass(frozen=True)
class DissipationBreakdown:
    D_par: float
    D_improved: float
    frakD: float
    contact_squares: tuple


class _Rec:
    __slots__ = ("idx", "t", "eta", "ep", "phi", "kdata", "bracket0", "e_phys", "mass")

    def __init__(self, idx, t, eta, ep, phi, kdata, bracket0, e_phys, mass):
        self.idx = idx
        self.t = t
        self.eta = eta
        self.ep = ep
        self.phi = phi
        self.kdata = kdata
        self.bracket0 = bracket0
        self.e_phys = e_phys
        self.mass = mass


class RecordBuilder:
    """Streams trajectory rows with five-sample derivative reconstruction.

    push() returns newly finalized rows (centered stencils lag two samples
    behind); close() flushes the tail with one-sided stencils.  Runs
    shorter than five records still produce rows, with the unavailable
    derivative orders dropped from the sums and the row index noted in
    partial_rows.
    """

    def __init__(self, mesh, params, hs, hs_slope, dt, v0=None):
        self.mesh = mesh
        self.params = params
        self.hs = np.asarray(hs, dtype=float)
        self.hs_slope = np.asarray(hs_slope, dtype=float)
        self.w = _weight(self.hs_slope)
        self.W = mesh.gamma_weights
        self.dx = float(mesh.x[1] - mesh.x[0])
        self.dt = dt
        self.v0 = None if v0 is None else np.asarray(v0, dtype=float)
        ones = np.ones(mesh.Y.shape)
        zeros = np.zeros(mesh.Y.shape)
        self.kdata_E = elliptic.assemble_data(mesh, ones, zeros, ones)
        self._er = np.repeat(np.arange(mesh.nnodes), np.diff(mesh.csr_indptr))
        self._ec = mesh.csr_indices
        self.ring: deque[_Rec] = deque(maxlen=5)
        self.total = 0
        self.emitted = 0
        self.partial_rows: list[int] = []

    # -- scalar helpers ----------------------------------------------

    def energy_form(self, kdata, u, v) -> float:
        return float(kdata @ (u[self._er] * v[self._ec]))

    def _h1sq(self, f) -> float:
        return float(self.W @ f**2 + self.W @ d1(f, self.dx) ** 2)

    def bracket0(self, eta, ep) -> float:
        g, sig = self.params.g, self.params.sigma
        dens = 0.5 * g * eta**2 + 0.5 * sig * self.w * ep**2
        dens = dens + sig * integral_R(self.hs_slope, ep)
        return float(self.W @ dens)

    def _make_rec(self, t, eta, phi, coeffs) -> _Rec:
        eta = np.asarray(eta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        ep = d1(eta, self.dx)
        kdata = elliptic.assemble_data(self.mesh, coeffs.a00, coeffs.a01, coeffs.a11)
        return _Rec(
            idx=self.total,
            t=t,
            eta=eta.copy(),
            ep=ep,
            phi=phi.copy(),
            kdata=kdata,
            bracket0=self.bracket0(eta, ep),
            e_phys=physical_energy(self.hs + eta, self.params, self.dx),
            mass=float(self.W @ eta),
        )

    # -- streaming ----------------------------------------------------

    def push(self, t, eta, phi, coeffs) -> list[list[float]]:
        self.ring.append(self._make_rec(t, eta, phi, coeffs))
        self.total += 1
        out = []
        if self.total == 5:
            for pos in (0, 1, 2):
                out.append(self._finalize(pos))
        elif self.total > 5:
            out.append(self._finalize(2))
        return out

    def close(self) -> list[list[float]]:
        out = []
        if self.total == 0:
            return out
        if self.total < 5:
            for pos in range(len(self.ring)):
                out.append(self._finalize(pos))
        else:
            out.append(self._finalize(3))
            out.append(self._finalize(4))
        return out

    # -- row assembly --------------------------------------------------

    def _deriv(self, values, ts, c, m):
        if len(ts) < m + 1:
            return None
        wts = fd_weights(ts, ts[c], m)
        out = wts[0] * values[0]
        for wk, vk in zip(wts[1:], values[1:]):
            out = out + wk * vk
        return out

    def _finalize(self, c: int) -> list[float]:
        rs = list(self.ring)
        ts = [r.t for r in rs]
        rec = rs[c]
        partial = len(rs) < 5
        if partial:
            self.partial_rows.append(rec.idx)

        etas = [r.eta for r in rs]
        phis = [r.phi for r in rs]
        brs = [r.bracket0 for r in rs]

        deta1 = self._deriv(etas, ts, c, 1)
        if rec.idx == 0 and self.v0 is not None:
            deta1 = self.v0
        deta2 = self._deriv(etas, ts, c, 2)
        deta3 = self._deriv(etas, ts, c, 3)
        dphi1 = self._deriv(phis, ts, c, 1)
        dphi2 = self._deriv(phis, ts, c, 2)
        dbr0 = self._deriv(brs, ts, c, 1)

        g, sig = self.params.g, self.params.sigma
        eta_fields = [rec.eta, deta1, deta2]
        phi_fields = [rec.phi, dphi1, dphi2]
        end_fields = [deta1, deta2, deta3]

        e_par = sum(self._h1sq(f) for f in eta_fields if f is not None)
        frak_e = sum(
            float(self.W @ (0.5 * g * f**2 + 0.5 * sig * self.w * d1(f, self.dx) ** 2))
            for f in eta_fields
            if f is not None
        )
        dep1 = None if deta1 is None else d1(deta1, self.dx)
        dep2 = None if deta2 is None else d1(deta2, self.dx)
        frak_f = float(sig * (self.W @ residual_Q(0, self.hs_slope, rec.ep)))
        if dep1 is not None:
            frak_f += float(sig * (self.W @ residual_Q(1, self.hs_slope, rec.ep, dep1)))
        if dep2 is not None:
            frak_f += float(
                sig * (self.W @ residual_Q(2, self.hs_slope, rec.ep, dep1, dep2))
            )

        ends_sq = 0.0
        for f in end_fields:
            if f is not None:
                ends_sq += float(f[0] ** 2 + f[-1] ** 2)
        d_par = ends_sq + sum(
            self.energy_form(self.kdata_E, f, f) for f in phi_fields if f is not None
        )
        frak_d = ends_sq + sum(
            self.energy_form(rec.kdata, f, f) for f in phi_fields if f is not None
        )

        if dbr0 is None or deta1 is None:
            residual = float("nan")
        else:
            residual = (
                dbr0
                + self.energy_form(rec.kdata, rec.phi, rec.phi)
                + deta1[0] ** 2
                + deta1[-1] ** 2
            )

        dte_m1 = float("nan") if deta1 is None else float(deta1[0])
        dte_p1 = float("nan") if deta1 is None else float(deta1[-1])
        self.emitted += 1
        return [
            rec.t,
            rec.e_phys,
            e_par,
            frak_e,
            frak_f,
            d_par,
            frak_d,
            float(rec.eta[0]),
            float(rec.eta[-1]),
            dte_m1,
            dte_p1,
            rec.mass,
            residual,
        ]


# -- trajectory analysis --------------------------------------------------


class Analyzer:
    """Recomputes every functional from stored (eta, Phi) snapshots."""

    def __init__(self, state, ny: int, params: PhysParams, delta: float = 0.5):
        self.state = state
        self.params = params
        self.delta = delta
        self.mesh = elliptic.mesh_from_state(state, ny)
        self.xi = diffeo.cutoff_xi(state.vessel, state.hs)
        self.hs_slope = state.hs_slope
        self.w = _weight(state.hs_slope)
        self.W = self.mesh.gamma_weights
        self.dx = float(self.mesh.x[1] - self.mesh.x[0])
        self.e_phys_floor = physical_energy(state.hs, params, self.dx)
        self._coeff_cache: OrderedDict[int, diffeo.CoeffFields] = OrderedDict()
        self._builder = RecordBuilder(
            self.mesh, params, state.hs, state.hs_slope, dt=0.0
        )

    # -- snapshot plumbing -------------------------------------------

    def _coeffs(self, traj: io.Trajectory, k: int) -> diffeo.CoeffFields:
        if k in self._coeff_cache:
            self._coeff_cache.move_to_end(k)
            return self._coeff_cache[k]
        eta = traj.snapshots[k][1]
        ext = diffeo.poisson_extend(diffeo.extend(eta), self.mesh)
        coeffs = diffeo.assemble_coeffs(ext, self.xi, self.mesh)
        self._coeff_cache[k] = coeffs
        while len(self._coeff_cache) > 6:
            self._coeff_cache.popitem(last=False)
        return coeffs

    def _initial_velocity(self, traj: io.Trajectory) -> FloatArray:
        t0, eta0, phi0 = traj.snapshots[0]
        coeffs = self._coeffs(traj, 0)
        v = dynamics_kinematic(eta0, phi0, coeffs, self.mesh)
        from .dynamics import contact_rhs

        cl, cr = contact_rhs(eta0, self.hs_slope, self.params, self.dx)
        W = self.W
        out = v.copy()
        out[0] = cl
        out[-1] = cr
        out[1] += (W[0] / W[1]) * (v[0] - cl)
        out[-2] += (W[-1] / W[-2]) * (v[-1] - cr)
        return out

    def recompute_rows(self, traj: io.Trajectory) -> dict[str, FloatArray]:
        """Replay the in-run record pipeline over the stored snapshots."""
        v0 = self._initial_velocity(traj) if traj.snapshots else None
        rb = RecordBuilder(
            self.mesh,
            self.params,
            self.state.hs,
            self.hs_slope,
            dt=0.0,
            v0=v0,
        )
        rows = []
        for k, (t, eta, phi) in enumerate(traj.snapshots):
            rows.extend(rb.push(t, eta, phi, self._coeffs(traj, k)))
        rows.extend(rb.close())
        arr = np.array(rows) if rows else np.zeros((0, len(io.TRAJ_COLUMNS)))
        return {name: arr[:, k] for k, name in enumerate(io.TRAJ_COLUMNS)}

    def _ring(self, traj, i, m_needed=3):
        lo = max(0, i - 2)
        hi = min(len(traj.snapshots), i + 3)
        ts = [traj.snapshots[k][0] for k in range(lo, hi)]
        return lo, hi, ts

    def _field_deriv(self, traj, i, which: int, m: int):
        """m-th time derivative of eta (which=1) or Phi (which=2) at index i."""
        if m == 0:
            return traj.snapshots[i][which]
        lo, hi, ts = self._ring(traj, i)
        vals = [traj.snapshots[k][which] for k in range(lo, hi)]
        if len(ts) < m + 1:
            return None
        wts = fd_weights(ts, traj.snapshots[i][0], m)
        out = wts[0] * vals[0]
        for wk, vk in zip(wts[1:], vals[1:]):
            out = out + wk * vk
        return out

    # -- series -------------------------------------------------------

    def basic_energy(self, traj: io.Trajectory) -> FloatArray:
        cols = self.recompute_rows(traj)
        return cols["E_par"]

    def basic_dissipation(self, traj: io.Trajectory) -> FloatArray:
        cols = self.recompute_rows(traj)
        return cols["D_par"]

    def frak_functionals(self, traj: io.Trajectory):
        cols = self.recompute_rows(traj)
        return cols["frakE"], cols["frakF"], cols["frakD"]

    def energy_identity_residual(self, traj: io.Trajectory) -> FloatArray:
        cols = self.recompute_rows(traj)
        return cols["residual_energy_identity"]

    def improved_energy(self, traj: io.Trajectory) -> FloatArray:
        """Basic energy plus the fractional surface norms it bootstraps to."""
        e_par = self.basic_energy(traj)
        out = np.array(e_par)
        for i in range(len(traj.snapshots)):
            eta = traj.snapshots[i][1]
            out[i] += sobolev_norm_frac(eta, 1.5 + self.delta, self.dx) ** 2
            deta = self._field_deriv(traj, i, 1, 1)
            if deta is not None:
                out[i] += sobolev_norm_frac(deta, 1.5, self.dx) ** 2
        return out

    def improved_dissipation(self, traj: io.Trajectory) -> FloatArray:
        d_par = self.basic_dissipation(traj)
        out = np.array(d_par)
        area = self.mesh.lumped_area
        for i in range(len(traj.snapshots)):
            for m in range(3):
                phi_m = self._field_deriv(traj, i, 2, m)
                eta_m = self._field_deriv(traj, i, 1, m)
                if phi_m is not None:
                    out[i] += float(area @ phi_m**2)
                if eta_m is not None:
                    out[i] += sobolev_norm_frac(eta_m, 2.5, self.dx) ** 2
            dphi = self._field_deriv(traj, i, 2, 1)
            if dphi is not None:
                out[i] += hessian_seminorm_sq(self.mesh, dphi)
        return out

    def mean_trace_checks(self, traj: io.Trajectory) -> dict:
        """Residual of the trace-mean identity plus the potential/dissipation ratio."""
        cols = self.recompute_rows(traj)
        times = cols["t"]
        gid = self.mesh.gamma_ids
        area = self.mesh.lumped_area
        residual = np.zeros(len(traj.snapshots))
        ratio = np.zeros(len(traj.snapshots))
        for i, (t, eta, phi) in enumerate(traj.snapshots):
            trace_int = float(self.W @ phi[gid])
            residual[i] = (
                trace_int
                + self.params.g * float(self.W @ eta)
                + cols["dteta_m1"][i]
                + cols["dteta_p1"][i]
            )
            l2 = float(area @ phi**2)
            dphi1 = self._field_deriv(traj, i, 2, 1)
            dphi2 = self._field_deriv(traj, i, 2, 2)
            if dphi1 is not None:
                l2 += float(area @ dphi1**2)
            if dphi2 is not None:
                l2 += float(area @ dphi2**2)
            dpar = cols["D_par"][i]
            ratio[i] = l2 / dpar if dpar > 0 else float("nan")
        return {"t": times, "residual": residual, "potential_over_D_par": ratio}

    def decay(self, traj: io.Trajectory, quantity: str = "E_par",
              window: tuple[float, float] | None = None) -> DecayFit:
        cols = traj.columns if quantity in traj.columns else self.recompute_rows(traj)
        times = cols["t"]
        if quantity == "E_par":
            series = cols["E_par"]
        elif quantity == "E_phys_excess":
            series = cols["E_phys"] - self.e_phys_floor
        else:
            raise ValueError(f"unknown decay quantity {quantity!r}")
        return decay_fit(times, series, window)

    # -- higher identity residuals -------------------------------------

    def _gamma_gradient(self, traj, k):
        """(d_x, d_y) of Phi on the surface from the weak flux and the trace."""
        phi = traj.snapshots[k][2]
        co = self._coeffs(traj, k)
        kdata = elliptic.assemble_data(self.mesh, co.a00, co.a01, co.a11)
        K = sp.csr_matrix(
            (kdata, self.mesh.csr_indices, self.mesh.csr_indptr),
            shape=(self.mesh.nnodes, self.mesh.nnodes),
        )
        q = (K @ phi)[self.mesh.gamma_ids] / self.W
        a00 = co.a00[:, -1]
        a01 = co.a01[:, -1]
        a11 = co.a11[:, -1]
        hp = self.hs_slope
        # rows: (A grad).N_hs = q ; grad.(1, hs') = d/dx trace
        r11 = -hp * a00 + a01
        r12 = -hp * a01 + a11
        tr = d1(phi[self.mesh.gamma_ids], self.dx)
        det = r11 * hp - r12
        gx = (q * hp - r12 * tr) / det
        gy = (r11 * tr - q) / det
        return gx, gy

    def _wall_columns(self, traj, k, side: str):
        """Vertical derivative of Phi along one wall column."""
        ids = self.mesh.side_nodes[side]
        phi = traj.snapshots[k][2][ids]
        ys = self.mesh.Y[0 if side == "left" else -1]
        dy = float(ys[1] - ys[0])
        return d1(phi, dy), ys

    def higher_identity_residual(self, traj: io.Trajectory, j: int):
        """Residual of the order-j identity, LHS minus assembled sources."""
        if j not in (1, 2):
            raise ValueError("higher identities exist for j = 1, 2")
        T = len(traj.snapshots)
        if T < 5:
            raise ValueError("need at least 5 snapshots for the order-j residual")
        times = np.array([s[0] for s in traj.snapshots])
        mesh = self.mesh
        g, sig = self.params.g, self.params.sigma
        hp = self.hs_slope
        gid = mesh.gamma_ids

        def eta_dots(k, m):
            # centered first/second derivatives, valid for 1 <= k <= T-2
            dt_ = times[k + 1] - times[k]
            if m == 1:
                return (traj.snapshots[k + 1][1] - traj.snapshots[k - 1][1]) / (2 * dt_)
            return (
                traj.snapshots[k + 1][1]
                - 2 * traj.snapshots[k][1]
                + traj.snapshots[k - 1][1]
            ) / dt_**2

        def bracket(k):
            eta_k = traj.snapshots[k][1]
            ep_k = d1(eta_k, self.dx)
            d1e = eta_dots(k, 1)
            d2e = eta_dots(k, 2)
            fld = d1e if j == 1 else d2e
            fldp = d1(fld, self.dx)
            dens = 0.5 * g * fld**2 + 0.5 * sig * self.w * fldp**2
            dens = dens + sig * residual_Q(
                j, hp, ep_k, d1(d1e, self.dx), d1(d2e, self.dx)
            )
            return float(self.W @ dens)

        out_t, out_r = [], []
        for i in range(2, T - 2):
            dt_ = times[i + 1] - times[i]
            co = self._coeffs(traj, i)
            kdata_i = elliptic.assemble_data(mesh, co.a00, co.a01, co.a11)
            kd = [
                elliptic.assemble_data(
                    mesh,
                    self._coeffs(traj, k).a00,
                    self._coeffs(traj, k).a01,
                    self._coeffs(traj, k).a11,
                )
                for k in (i - 1, i + 1)
            ]
            dkdata1 = (kd[1] - kd[0]) / (2 * dt_)
            co_m, co_p = self._coeffs(traj, i - 1), self._coeffs(traj, i + 1)
            dkdata2 = (kd[1] + kd[0] - 2 * kdata_i) / dt_**2

            phi_i = traj.snapshots[i][2]
            dphi1 = (traj.snapshots[i + 1][2] - traj.snapshots[i - 1][2]) / (2 * dt_)
            dphi2 = (
                traj.snapshots[i + 1][2]
                - 2 * phi_i
                + traj.snapshots[i - 1][2]
            ) / dt_**2
            deta1 = eta_dots(i, 1)
            deta2 = eta_dots(i, 2)
            wts3 = fd_weights(times[i - 2 : i + 3], times[i], 3)
            deta3 = sum(
                wk * traj.snapshots[k][1]
                for wk, k in zip(wts3, range(i - 2, i + 3))
            )
            ep_i = d1(traj.snapshots[i][1], self.dx)
            dep1 = d1(deta1, self.dx)
            dep2 = d1(deta2, self.dx)

            # left side: d/dt bracket + transformed Dirichlet energy + contact squares
            dbr = (bracket(i + 1) - bracket(i - 1)) / (2 * dt_)
            dphij = dphi1 if j == 1 else dphi2
            ends = deta2 if j == 1 else deta3
            lhs = (
                dbr
                + self._builder.energy_form(kdata_i, dphij, dphij)
                + ends[0] ** 2
                + ends[-1] ** 2
            )

            # sources: volume, wall, surface, and slope-remainder integrals
            if j == 1:
                vol = -self._builder.energy_form(dkdata1, phi_i, dphij)
            else:
                vol = -2.0 * self._builder.energy_form(dkdata1, dphi1, dphij)
                vol -= self._builder.energy_form(dkdata2, phi_i, dphij)

            gx_m, gy_m = self._gamma_gradient(traj, i - 1)
            gx_i, gy_i = self._gamma_gradient(traj, i)
            gx_p, gy_p = self._gamma_gradient(traj, i + 1)
            gx1 = (gx_p - gx_m) / (2 * dt_)
            gy1 = (gy_p - gy_m) / (2 * dt_)

            da00 = (co_p.a00[:, -1] - co_m.a00[:, -1]) / (2 * dt_)
            da01 = (co_p.a01[:, -1] - co_m.a01[:, -1]) / (2 * dt_)
            da11 = (co_p.a11[:, -1] - co_m.a11[:, -1]) / (2 * dt_)
            d2a00 = (co_p.a00[:, -1] + co_m.a00[:, -1] - 2 * co.a00[:, -1]) / dt_**2
            d2a01 = (co_p.a01[:, -1] + co_m.a01[:, -1] - 2 * co.a01[:, -1]) / dt_**2
            d2a11 = (co_p.a11[:, -1] + co_m.a11[:, -1] - 2 * co.a11[:, -1]) / dt_**2
            if j == 1:
                bnx = da00 * gx_i + da01 * gy_i
                bny = da01 * gx_i + da11 * gy_i
            else:
                bnx = 2 * (da00 * gx1 + da01 * gy1) + d2a00 * gx_i + d2a01 * gy_i
                bny = 2 * (da01 * gx1 + da11 * gy1) + d2a01 * gx_i + d2a11 * gy_i
            dphij_g = dphij[gid]
            vol += float(self.W @ ((bnx * (-hp) + bny) * dphij_g))

            # side walls: use the zero conormal flux to express d_x Phi
            wall_S = 0.0
            wall_vol = 0.0
            for side, sgn in (("left", -1.0), ("right", 1.0)):
                col = 0 if side == "left" else -1
                ids = self.mesh.side_nodes[side]
                ys = mesh.Y[col]
                dy = float(ys[1] - ys[0])
                wy = np.full(ys.size, dy)
                wy[0] = wy[-1] = 0.5 * dy
                gy_w = d1(phi_i[ids], dy)
                gy_w1 = (
                    d1(traj.snapshots[i + 1][2][ids], dy)
                    - d1(traj.snapshots[i - 1][2][ids], dy)
                ) / (2 * dt_)
                ds01_1 = (co_p.s01[col] - co_m.s01[col]) / (2 * dt_)
                ds01_2 = (co_p.s01[col] + co_m.s01[col] - 2 * co.s01[col]) / dt_**2
                detj_w = co.detj[col]
                if j == 1:
                    f3 = -sgn * ds01_1 * gy_w
                else:
                    f3 = -sgn * (ds01_1 * gy_w1 + ds01_2 * gy_w)
                wall_S += float(wy @ (detj_w * f3 * dphij[ids]))
                # boundary part of the volume correction on this wall
                a00_w = co.a00[col]
                a01_w = co.a01[col]
                gx_w = -(a01_w / a00_w) * gy_w
                gx_w1 = (
                    -(co_p.a01[col] / co_p.a00[col]) * d1(traj.snapshots[i + 1][2][ids], dy)
                    + (co_m.a01[col] / co_m.a00[col]) * d1(traj.snapshots[i - 1][2][ids], dy)
                ) / (2 * dt_)
                da00_w = (co_p.a00[col] - co_m.a00[col]) / (2 * dt_)
                da01_w = (co_p.a01[col] - co_m.a01[col]) / (2 * dt_)
                d2a00_w = (co_p.a00[col] + co_m.a00[col] - 2 * a00_w) / dt_**2
                d2a01_w = (co_p.a01[col] + co_m.a01[col] - 2 * a01_w) / dt_**2
                if j == 1:
                    bn_w = da00_w * gx_w + da01_w * gy_w
                else:
                    bn_w = (
                        2 * (da00_w * gx_w1 + da01_w * gy_w1)
                        + d2a00_w * gx_w
                        + d2a01_w * gy_w
                    )
                wall_vol += float(wy @ (sgn * bn_w * dphij[ids]))
            vol += wall_vol

            # surface source: time derivatives of the pulled-back normal
            H = hp + ep_i
            s01_i, s11_i = co.s01[:, -1], co.s11[:, -1]
            ds01 = (co_p.s01[:, -1] - co_m.s01[:, -1]) / (2 * dt_)
            ds11 = (co_p.s11[:, -1] - co_m.s11[:, -1]) / (2 * dt_)
            d2s01 = (co_p.s01[:, -1] + co_m.s01[:, -1] - 2 * s01_i) / dt_**2
            d2s11 = (co_p.s11[:, -1] + co_m.s11[:, -1] - 2 * s11_i) / dt_**2
            dSN = (-dep1, -ds01 * H - s01_i * dep1 + ds11)
            if j == 1:
                f1 = dSN[0] * gx_i + dSN[1] * gy_i
            else:
                d2SN = (
                    -dep2,
                    -d2s01 * H - 2 * ds01 * dep1 - s01_i * dep2 + d2s11,
                )
                f1 = 2 * (dSN[0] * gx1 + dSN[1] * gy1) + (
                    d2SN[0] * gx_i + d2SN[1] * gy_i
                )
            gamma_S = -float(self.W @ (f1 * dphij_g))

            srcF = sig * float(self.W @ source_calF(j, hp, ep_i, dep1, dep2))
            s_total = vol + wall_S + gamma_S + srcF
            out_t.append(times[i])
            out_r.append(lhs - s_total)
        return np.array(out_t), np.array(out_r)

    # -- report ----------------------------------------------------------

    def report(self, traj: io.Trajectory) -> dict:
        cols = self.recompute_rows(traj)
        frak_e, frak_f = cols["frakE"], cols["frakF"]
        with np.errstate(invalid="ignore", divide="ignore"):
            sandwich_lo = frak_e + frak_f - 0.5 * frak_e
            sandwich_hi = 1.5 * frak_e - (frak_e + frak_f)
            ratio = np.where(cols["E_par"] > 0, frak_e / cols["E_par"], np.nan)
        rep: dict = {
            "records": int(cols["t"].size),
            "t_final": float(cols["t"][-1]) if cols["t"].size else 0.0,
            "sandwich_ok": bool(np.all(sandwich_lo >= -1e-12) and np.all(sandwich_hi >= -1e-12)),
            "frakE_over_E_par": [
                float(np.nanmin(ratio)) if ratio.size else float("nan"),
                float(np.nanmax(ratio)) if ratio.size else float("nan"),
            ],
            "residual_energy_identity_max": float(
                np.nanmax(np.abs(cols["residual_energy_identity"]))
            )
            if cols["t"].size
            else 0.0,
            "E_phys_lower_bound_margin": float(
                np.min(
                    cols["E_phys"]
                    - (
                        self.e_phys_floor
                        - 2.0
                        * abs(self.params.gamma_jump)
                        * (np.abs(cols["eta_m1"]) + np.abs(cols["eta_p1"]))
                    )
                )
            )
            if cols["t"].size
            else 0.0,
        }
        mt = self.mean_trace_checks(traj)
        rep["mean_trace_residual_max"] = float(np.max(np.abs(mt["residual"])))
        finite = mt["potential_over_D_par"][np.isfinite(mt["potential_over_D_par"])]
        rep["potential_over_D_par_max"] = float(finite.max()) if finite.size else float("nan")
        if cols["t"].size >= 8:
            try:
                fit = decay_fit(cols["t"], cols["E_par"])
                rep["decay"] = {
                    "quantity": "E_par",
                    "lambda": fit.rate,
                    "r_squared": fit.r_squared,
                    "window": list(fit.window),
                }
            except ValueError as exc:
                rep["decay"] = {"error": str(exc)}
        return rep


def dynamics_kinematic(eta, phi, coeffs, mesh):
    from .dynamics import kinematic_rhs

    return kinematic_rhs(eta, phi, coeffs, mesh)


# -- mesh second derivatives ----------------------------------------------


def _d_axis1(grid: FloatArray, dy: FloatArray) -> FloatArray:
    """Column-wise first derivative for per-column uniform spacing."""
    out = np.empty_like(grid)
    out[:, 1:-1] = (grid[:, 2:] - grid[:, :-2]) / (2.0 * dy[:, None])
    out[:, 0] = (-3.0 * grid[:, 0] + 4.0 * grid[:, 1] - grid[:, 2]) / (2.0 * dy)
    out[:, -1] = (3.0 * grid[:, -1] - 4.0 * grid[:, -2] + grid[:, -3]) / (2.0 * dy)
    return out


def _grad_nodes(mesh, grid: FloatArray) -> tuple[FloatArray, FloatArray]:
    dy = mesh.Y[:, 1] - mesh.Y[:, 0]
    gy = _d_axis1(grid, dy)
    gxi = np.gradient(grid, mesh.x, axis=0, edge_order=2)
    yxi = np.gradient(mesh.Y, mesh.x, axis=0, edge_order=2)
    return gxi - yxi * gy, gy


def hessian_seminorm_sq(mesh, phi: FloatArray) -> float:
    """Squared L2 norm of the second derivatives, nodal finite differences."""
    grid = mesh.node_grid(np.asarray(phi, dtype=float))
    gx, gy = _grad_nodes(mesh, grid)
    gxx, gxy = _grad_nodes(mesh, gx)
    gyx, gyy = _grad_nodes(mesh, gy)
    mixed = 0.5 * (gxy + gyx)
    dens = gxx**2 + 2.0 * mixed**2 + gyy**2
    return float(mesh.lumped_area @ dens.ravel())


# -- module-level wrappers (thin, for symmetry with the operation names) --


def basic_energy(traj: io.Trajectory, setup: Analyzer) -> FloatArray:
    return setup.basic_energy(traj)


def basic_dissipation(traj: io.Trajectory, setup: Analyzer) -> FloatArray:
    return setup.basic_dissipation(traj)


def frak_functionals(traj: io.Trajectory, setup: Analyzer):
    return setup.frak_functionals(traj)


def energy_identity_residual(traj: io.Trajectory, setup: Analyzer) -> FloatArray:
    return setup.energy_identity_residual(traj)


def higher_identity_residual(traj: io.Trajectory, setup: Analyzer, j: int):
    return setup.higher_identity_residual(traj, j)


def mean_trace_checks(traj: io.Trajectory, setup: Analyzer) -> dict:
    return setup.mean_trace_checks(traj)
