"""Time evolution of the surface perturbation over a stationary meniscus.

The free surface is h_s + eta.  Away from the walls eta moves with the
conormal flux of the transformed potential, whose Dirichlet trace is the
linearized curvature data built from eta; at the two contact points eta
follows its own first-order law in the one-sided slope.  Both schemes
below override the flux at the end nodes with the contact law and deposit
the displaced flux into the neighbouring nodes, weighted so that the
trapezoid mass functional is conserved exactly, step by step, for either
scheme.  Mass is therefore a hard invariant and is checked, never
re-projected.

The explicit scheme rebuilds the coefficient fields and the elliptic
operator every step and is limited by a dt ~ dx^3 stability bound (the
flux map scales like |zeta| and the curvature like zeta^2).  The
semi-implicit scheme treats the linear part of the surface data through
the flux matrix implicitly and refreshes that matrix every dn_refresh
steps, which removes the dx^3 restriction at the price of a dense
(N_x+1) solve per step.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import diffeo, elliptic, io
from .core import FloatArray, PhysParams, d1, d1_matrix, remainder_R
from .elliptic import SolveError
from .stationary import StationaryState


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    t_end: float
    scheme: str = "semi-implicit"
    dn_refresh: int = 1
    snapshot_stride: int = 1

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if self.scheme not in ("explicit", "semi-implicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.dn_refresh < 1:
            raise ValueError("dn_refresh counts steps between rebuilds, >= 1")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")


@dataclass
class SimState:
    t: float
    eta: FloatArray
    Phi: FloatArray
    coeffs: diffeo.CoeffFields
    eta_history: deque = field(default_factory=lambda: deque(maxlen=5))
    engine: "_Engine" = None


# -- surface data -------------------------------------------------------


def surface_weight(hs_slope: FloatArray) -> FloatArray:
    """Linearized curvature weight 1/(1 + h_s'^2)^(3/2)."""
    return (1.0 + hs_slope**2) ** -1.5


def dirichlet_data(eta: FloatArray, hs_slope: FloatArray, params: PhysParams, dx: float) -> FloatArray:
    """Surface trace of the potential for a given perturbation."""
    ep = d1(eta, dx)
    w = surface_weight(hs_slope)
    return -params.g * eta + params.sigma * d1(
        w * ep + remainder_R(hs_slope, ep), dx
    )


def contact_rhs(eta: FloatArray, hs_slope: FloatArray, params: PhysParams, dx: float) -> tuple[float, float]:
    """Endpoint velocities: the slope-flux increment, signed inward."""
    ep = d1(eta, dx)
    w = surface_weight(hs_slope)
    flux = w * ep + remainder_R(hs_slope, ep)
    return params.sigma * flux[0], -params.sigma * flux[-1]


def kinematic_rhs(eta: FloatArray, phi: FloatArray, coeffs, mesh) -> FloatArray:
    """Surface velocity as the weak conormal flux density of phi.

    The flux through the deformed surface equals the transformed flux
    through the stationary one, so no slope pairing appears here; phi
    must already solve the mixed problem for the current coefficients.
    """
    if eta.size != mesh.nx + 1:
        raise ValueError("eta does not live on the mesh surface grid")
    kdata = elliptic.assemble_data(mesh, coeffs.a00, coeffs.a01, coeffs.a11)
    import scipy.sparse as sp

    K = sp.csr_matrix((kdata, mesh.csr_indices, mesh.csr_indptr))
    return (K @ phi)[mesh.gamma_ids] / mesh.gamma_weights


# -- stepping engine ----------------------------------------------------


class _Engine:
    """Everything that outlives a step: mesh, stencils, cached operator."""

    def __init__(self, state: StationaryState, ny: int, params: PhysParams):
        self.state = state
        self.params = params
        self.mesh = elliptic.mesh_from_state(state, ny)
        self.xi = diffeo.cutoff_xi(state.vessel, state.hs)
        n = state.x.size - 1
        self.dx = 2.0 / n
        self.hs_slope = state.hs_slope
        self.w = surface_weight(state.hs_slope)
        self.W = self.mesh.gamma_weights
        d1m = d1_matrix(n, self.dx).toarray()
        self.d1m = d1m
        # linear part of the surface data: -g*eta + sigma*(w*eta')'
        self.lin = -params.g * np.eye(n + 1) + params.sigma * (
            d1m @ (self.w[:, None] * d1m)
        )
        self.op: elliptic.Operator | None = None
        self.dn: elliptic.DNMatrix | None = None
        self.M: FloatArray | None = None
        self._B_ends: tuple[FloatArray, FloatArray] | None = None
        self.lu = None
        self.dt_factored: float | None = None
        self.steps_since_refresh = 0
        self.corner_mismatch_max = 0.0

    def coeffs(self, eta: FloatArray) -> diffeo.CoeffFields:
        ext = diffeo.poisson_extend(diffeo.extend(eta), self.mesh)
        return diffeo.assemble_coeffs(ext, self.xi, self.mesh)

    def data(self, eta: FloatArray) -> FloatArray:
        return dirichlet_data(eta, self.hs_slope, self.params, self.dx)

    def refresh(self, eta: FloatArray, with_dn: bool = True, coeffs=None) -> None:
        if coeffs is None:
            coeffs = self.coeffs(eta)
        self.op = elliptic.Operator(self.mesh, coeffs)
        if not with_dn:
            self.dn = None
            self.M = None
            self.lu = None
            self.steps_since_refresh = 0
            return
        self.dn = self.op.dn_matrix()
        sig = self.params.sigma
        B = self.dn.mat @ self.lin
        row0 = sig * self.w[0] * self.d1m[0]
        rowN = -sig * self.w[-1] * self.d1m[-1]
        M = B.copy()
        M[0] = row0
        M[-1] = rowN
        W = self.W
        # conservative corner deposits: whatever flux the contact override
        # removes from the end nodes lands on the neighbours, so the
        # trapezoid-weighted column sums stay exactly zero
        M[1] += (W[0] / W[1]) * (B[0] - row0)
        M[-2] += (W[-1] / W[-2]) * (B[-1] - rowN)
        self._B_ends = (B[0].copy(), B[-1].copy())
        self.M = M
        self.lu = None
        self.steps_since_refresh = 0
        self._log_mismatch(eta)

    def velocity_vec(self, eta: FloatArray) -> FloatArray:
        """Explicit remainder of the velocity: v(eta) = M @ eta + this."""
        sig = self.params.sigma
        r = remainder_R(self.hs_slope, d1(eta, self.dx))
        cb = self.dn.mat @ (sig * (self.d1m @ r))
        c = cb.copy()
        c[0] = sig * r[0]
        c[-1] = -sig * r[-1]
        W = self.W
        c[1] += (W[0] / W[1]) * (cb[0] - c[0])
        c[-2] += (W[-1] / W[-2]) * (cb[-1] - c[-1])
        return c

    def velocity(self, eta: FloatArray) -> FloatArray:
        return self.M @ eta + self.velocity_vec(eta)

    def _log_mismatch(self, eta: FloatArray) -> None:
        base = self._B_ends[0] @ eta, self._B_ends[1] @ eta
        r = remainder_R(self.hs_slope, d1(eta, self.dx))
        sig = self.params.sigma
        base = (
            base[0] + (self.dn.mat[0] @ (sig * (self.d1m @ r))),
            base[1] + (self.dn.mat[-1] @ (sig * (self.d1m @ r))),
        )
        cl, cr = contact_rhs(eta, self.hs_slope, self.params, self.dx)
        gap = max(abs(base[0] - cl), abs(base[1] - cr))
        self.corner_mismatch_max = max(self.corner_mismatch_max, gap)

    def factor(self, dt: float) -> None:
        A = np.eye(self.M.shape[0]) - dt * self.M
        self.lu = sla.lu_factor(A, check_finite=False)
        diag = np.abs(np.diag(self.lu[0]))
        if not np.all(np.isfinite(diag)) or diag.min() < 1e-300:
            raise SolveError(
                "stepping matrix is singular; dt or the grid is misconfigured"
            )
        self.dt_factored = dt


def prepare(
    state: StationaryState,
    ny: int,
    params: PhysParams,
    eta0: FloatArray,
    project_mean: bool = True,
) -> SimState:
    """Build a simulation state; projects the mean out of eta0 by default."""
    engine = _Engine(state, ny, params)
    eta = np.array(eta0, dtype=float)
    if eta.size != state.x.size:
        raise ValueError("initial eta does not live on the stationary grid")
    W = engine.W
    mean_mag = float(abs(W @ eta) / W.sum())
    if project_mean:
        eta = eta - (W @ eta) / W.sum()
    coeffs = engine.coeffs(eta)
    engine.refresh(eta, coeffs=coeffs)
    phi = engine.op.solve_dirichlet(engine.data(eta))
    sim = SimState(t=0.0, eta=eta, Phi=phi, coeffs=coeffs, engine=engine)
    sim.eta_history.append((0.0, eta.copy()))
    sim.projected_mean = mean_mag
    return sim


def _apply_contact(v, eta, engine) -> FloatArray:
    cl, cr = contact_rhs(eta, engine.hs_slope, engine.params, engine.dx)
    engine.corner_mismatch_max = max(
        engine.corner_mismatch_max, abs(v[0] - cl), abs(v[-1] - cr)
    )
    W = engine.W
    out = v.copy()
    out[0] = cl
    out[-1] = cr
    out[1] += (W[0] / W[1]) * (v[0] - cl)
    out[-2] += (W[-1] / W[-2]) * (v[-1] - cr)
    return out


def step_explicit(sim: SimState, dt: float) -> SimState:
    """Forward Euler with a fresh operator each step."""
    engine = sim.engine
    if engine.op is None or engine.op.coeff_token != sim.coeffs.token:
        engine.refresh(sim.eta, with_dn=False, coeffs=sim.coeffs)
        sim.Phi = engine.op.solve_dirichlet(engine.data(sim.eta))
    v = engine.op.flux_density(engine.op.weak_flux(sim.Phi))
    v = _apply_contact(v, sim.eta, engine)
    sim.eta = sim.eta + dt * v
    sim.t += dt
    if not np.all(np.isfinite(sim.eta)):
        raise SolveError(f"surface became non-finite at t={sim.t:.6f}")
    sim.coeffs = engine.coeffs(sim.eta)
    engine.refresh(sim.eta, with_dn=False, coeffs=sim.coeffs)
    sim.Phi = engine.op.solve_dirichlet(engine.data(sim.eta))
    sim.eta_history.append((sim.t, sim.eta.copy()))
    return sim


def step_semi_implicit(sim: SimState, dt: float, dn_refresh: int = 1) -> SimState:
    """Backward Euler in the linear data, explicit in the slope remainder."""
    engine = sim.engine
    if engine.M is None or engine.steps_since_refresh >= dn_refresh:
        engine.refresh(sim.eta)
    if engine.lu is None or engine.dt_factored != dt:
        engine.factor(dt)
    c = engine.velocity_vec(sim.eta)
    sim.eta = sla.lu_solve(engine.lu, sim.eta + dt * c, check_finite=False)
    sim.t += dt
    engine.steps_since_refresh += 1
    if not np.all(np.isfinite(sim.eta)):
        raise SolveError(f"surface became non-finite at t={sim.t:.6f}")
    sim.coeffs = engine.coeffs(sim.eta)
    sim.Phi = engine.op.solve_dirichlet(engine.data(sim.eta))
    sim.eta_history.append((sim.t, sim.eta.copy()))
    return sim


def stability_bound(sim: SimState) -> float:
    """Empirical explicit step bound 2/rho(M) from the dense velocity matrix."""
    engine = sim.engine
    if engine.M is None:
        engine.refresh(sim.eta)
    rho = float(np.max(np.abs(np.linalg.eigvals(engine.M))))
    return 2.0 / rho


# -- run loop -----------------------------------------------------------


@dataclass
class RunResult:
    trajectory: io.Trajectory
    status: str
    message: str = ""
    csv_path: str | None = None
    summary_path: str | None = None
    sim: SimState | None = None


def run(
    cfg: StepperConfig,
    state: StationaryState,
    params: PhysParams,
    initial_eta: FloatArray,
    ny: int,
    out_dir: str | None = None,
    prefix: str = "run",
    config_echo: dict | None = None,
) -> RunResult:
    """Step to t_end, streaming one diagnostics row per step.

    Snapshots of (eta, Phi) are kept every snapshot_stride steps.  A
    coefficient breakdown mid-run truncates the trajectory and labels the
    summary instead of raising.
    """
    from . import diagnostics

    sim = prepare(state, ny, params, initial_eta)
    engine = sim.engine
    mass0 = float(engine.W @ sim.eta)
    scale0 = float(np.sqrt(engine.W @ sim.eta**2))
    v0 = engine.velocity(sim.eta)

    rec = diagnostics.RecordBuilder(
        engine.mesh, params, state.hs, state.hs_slope, dt=cfg.dt, v0=v0
    )
    writer = io.TrajectoryWriter(out_dir, prefix) if out_dir is not None else None
    snapshots: list[tuple[float, FloatArray, FloatArray]] = []
    nsteps = int(round(cfg.t_end / cfg.dt)) if cfg.t_end > 0 else 0
    status, message = "completed", ""
    rows_out: list[list[float]] = []

    def emit(rows):
        for row in rows:
            rows_out.append(row)
            if writer is not None:
                writer.row(row)

    def keep_snapshot(index, t):
        snapshots.append((t, sim.eta.copy(), sim.Phi.copy()))
        if writer is not None:
            writer.snapshot(
                index,
                t,
                engine.mesh.nx,
                engine.mesh.ny,
                {"eta": sim.eta, "Phi": sim.Phi},
            )

    emit(rec.push(sim.t, sim.eta, sim.Phi, sim.coeffs))
    keep_snapshot(0, sim.t)
    try:
        for m in range(1, nsteps + 1):
            if cfg.scheme == "explicit":
                step_explicit(sim, cfg.dt)
            else:
                step_semi_implicit(sim, cfg.dt, cfg.dn_refresh)
            if not np.all(np.isfinite(sim.eta)):
                raise SolveError(f"surface became non-finite at t={sim.t:.6f}")
            emit(rec.push(sim.t, sim.eta, sim.Phi, sim.coeffs))
            if m % cfg.snapshot_stride == 0 or m == nsteps:
                keep_snapshot(m, sim.t)
            drift = abs(float(engine.W @ sim.eta) - mass0)
            if scale0 > 0 and drift > 1e-6 * scale0:
                raise SolveError(
                    f"mass drift {drift:.3e} exceeds 1e-6 * {scale0:.3e} at t={sim.t:.6f}"
                )
    except (diffeo.BreakdownError, SolveError, elliptic.CompatibilityError) as exc:
        status, message = "breakdown", str(exc)
    emit(rec.close())

    columns = {
        name: np.array([row[k] for row in rows_out])
        for k, name in enumerate(io.TRAJ_COLUMNS)
    }
    summary = {
        "prefix": prefix,
        "status": status,
        "message": message,
        "scheme": cfg.scheme,
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "t_final": sim.t,
        "steps": len(rows_out) - 1,
        "nx": engine.mesh.nx,
        "ny": engine.mesh.ny,
        "projected_mean": sim.projected_mean,
        "mass_initial": mass0,
        "mass_drift_max": float(np.max(np.abs(columns["mass"] - mass0)))
        if rows_out
        else 0.0,
        "corner_mismatch_max": engine.corner_mismatch_max,
        "partial_rows": rec.partial_rows,
    }
    if config_echo is not None:
        summary["config"] = config_echo
    traj = io.Trajectory(columns=columns, snapshots=snapshots, summary=summary)
    result = RunResult(trajectory=traj, status=status, message=message, sim=sim)
    if writer is not None:
        writer.close(summary)
        result.csv_path = writer.csv_path
        result.summary_path = writer.summary_path
    return result
