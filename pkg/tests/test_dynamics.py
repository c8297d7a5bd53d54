"""Surface evolution: data assembly, contact law, conservation, stepping."""
import numpy as np
import pytest

from muskat import dynamics
from muskat.core import PhysParams, VesselGeometry, d1, slope_flux
from muskat.stationary import solve_stationary


def flat_state(n=32, mass=4.0, jump=0.0):
    p = PhysParams(g=1.0, sigma=1.0, gamma_jump=jump, mass=mass)
    vessel = VesselGeometry.from_callable(lambda x: -1.0 * np.ones_like(x), n)
    return p, solve_stationary(p, vessel, n)


def cosine_eta(x, amp=0.01):
    return amp * np.cos(np.pi * (x + 1.0))


class TestSurfaceData:
    def test_flat_data_is_full_curvature(self):
        # over a flat meniscus the linear weight plus remainder recombine
        # into the exact graph curvature flux
        p, st = flat_state(n=64)
        x = st.x
        eta = 0.2 * np.cos(np.pi * x) + 0.05 * np.sin(2 * np.pi * x)
        dx = x[1] - x[0]
        data = dynamics.dirichlet_data(eta, st.hs_slope, p, dx)
        ep = d1(eta, dx)
        expected = -p.g * eta + p.sigma * d1(ep / np.sqrt(1 + ep**2), dx)
        assert np.max(np.abs(data - expected)) < 1e-12

    def test_data_linearization(self):
        p, st = flat_state(n=32)
        x = st.x
        dx = x[1] - x[0]
        base = np.cos(np.pi * x)
        d_small = dynamics.dirichlet_data(1e-7 * base, st.hs_slope, p, dx)
        lin = d1(d1(base, dx), dx) * p.sigma - p.g * base
        assert np.max(np.abs(d_small / 1e-7 - lin)) < 1e-5

    def test_contact_rhs_matches_flux_increment(self):
        p = PhysParams(g=1.0, sigma=2.0, gamma_jump=0.5, mass=4.0)
        vessel = VesselGeometry.from_callable(lambda x: -1.0 * np.ones_like(x), 64)
        st = solve_stationary(p, vessel, 64)
        x = st.x
        eta = 0.05 * np.sin(0.5 * np.pi * x) + 0.02 * x**2
        dx = x[1] - x[0]
        cl, cr = dynamics.contact_rhs(eta, st.hs_slope, p, dx)
        hp = st.hs_slope + d1(eta, dx)
        assert cl == pytest.approx(
            p.sigma * (slope_flux(hp[0]) - slope_flux(st.hs_slope[0])), abs=1e-12
        )
        assert cr == pytest.approx(
            -p.sigma * (slope_flux(hp[-1]) - slope_flux(st.hs_slope[-1])), abs=1e-12
        )

    def test_contact_rhs_is_young_defect(self):
        # both endpoints move at sigma * (cos(equilibrium angle) - cos(current))
        p = PhysParams(g=1.0, sigma=1.0, gamma_jump=0.25, mass=4.0)
        vessel = VesselGeometry.from_callable(lambda x: -1.0 * np.ones_like(x), 128)
        st = solve_stationary(p, vessel, 128)
        x = st.x
        eta = 0.03 * np.cos(np.pi * x) + 0.01 * x
        dx = x[1] - x[0]
        cl, cr = dynamics.contact_rhs(eta, st.hs_slope, p, dx)
        hp = st.hs_slope + d1(eta, dx)
        cos_eq = p.gamma_jump / p.sigma
        cos_left = -slope_flux(hp[0])
        cos_right = slope_flux(hp[-1])
        assert abs(slope_flux(st.hs_slope[-1]) - cos_eq) < 1e-6
        assert cl == pytest.approx(p.sigma * (cos_eq - cos_left), abs=2e-6)
        assert cr == pytest.approx(p.sigma * (cos_eq - cos_right), abs=2e-6)

    def test_equilibrium_velocity_vanishes(self):
        for jump in (0.0, 0.5):
            p, st = flat_state(n=32, jump=jump)
            dx = st.x[1] - st.x[0]
            zero = np.zeros_like(st.x)
            data = dynamics.dirichlet_data(zero, st.hs_slope, p, dx)
            cl, cr = dynamics.contact_rhs(zero, st.hs_slope, p, dx)
            assert np.max(np.abs(data)) < 1e-9
            assert abs(cl) < 1e-10 and abs(cr) < 1e-10


class TestKinematicFlux:
    def test_integral_vanishes(self):
        # no flux escapes the walls, so the surface flux has zero mean
        p, st = flat_state(n=32)
        sim = dynamics.prepare(st, 16, p, cosine_eta(st.x))
        v = dynamics.kinematic_rhs(sim.eta, sim.Phi, sim.coeffs, sim.engine.mesh)
        assert abs(sim.engine.W @ v) < 1e-10

    def test_wrong_grid_rejected(self):
        p, st = flat_state(n=32)
        sim = dynamics.prepare(st, 16, p, cosine_eta(st.x))
        with pytest.raises(ValueError):
            dynamics.kinematic_rhs(
                np.zeros(7), sim.Phi, sim.coeffs, sim.engine.mesh
            )


class TestConservation:
    def test_velocity_matrix_columns_sum_to_zero(self):
        # the contact override deposits make mass a hard invariant of the
        # linear part for every surface, not just along trajectories
        p, st = flat_state(n=32)
        sim = dynamics.prepare(st, 16, p, cosine_eta(st.x))
        M = sim.engine.M
        col = sim.engine.W @ M
        assert np.max(np.abs(col)) < 1e-11

    def test_explicit_remainder_sums_to_zero(self):
        p, st = flat_state(n=32)
        sim = dynamics.prepare(st, 16, p, cosine_eta(st.x, amp=0.05))
        c = sim.engine.velocity_vec(sim.eta)
        assert abs(sim.engine.W @ c) < 1e-12

    @pytest.mark.parametrize("scheme", ["explicit", "semi-implicit"])
    def test_mass_frozen_along_run(self, scheme):
        p, st = flat_state(n=32)
        rng = np.random.default_rng(7)
        eta0 = 0.01 * rng.standard_normal(st.x.size)
        dt = 2e-5 if scheme == "explicit" else 1e-3
        cfg = dynamics.StepperConfig(dt=dt, t_end=50 * dt, scheme=scheme)
        res = dynamics.run(cfg, st, p, eta0, ny=16)
        assert res.status == "completed"
        mass = res.trajectory.columns["mass"]
        assert np.max(np.abs(mass - mass[0])) < 1e-13


class TestFixedPoint:
    @pytest.mark.parametrize("jump", [0.0, 0.5])
    def test_equilibrium_is_fixed(self, jump):
        p, st = flat_state(n=32, jump=jump)
        cfg = dynamics.StepperConfig(dt=1e-3, t_end=0.1, scheme="semi-implicit")
        res = dynamics.run(cfg, st, p, np.zeros_like(st.x), ny=16)
        assert res.status == "completed"
        assert np.max(np.abs(res.sim.eta)) < 1e-12

    def test_equilibrium_records_are_static(self):
        p, st = flat_state(n=32)
        cfg = dynamics.StepperConfig(dt=1e-3, t_end=0.01)
        res = dynamics.run(cfg, st, p, np.zeros_like(st.x), ny=16)
        cols = res.trajectory.columns
        assert np.max(np.abs(cols["E_par"])) < 1e-20
        assert np.max(np.abs(cols["residual_energy_identity"])) < 1e-20
        assert np.max(np.abs(cols["E_phys"] - cols["E_phys"][0])) < 1e-13


class TestStepping:
    def test_explicit_dissipates_physical_energy(self):
        p, st = flat_state(n=32)
        sim = dynamics.prepare(st, 16, p, cosine_eta(st.x))
        dt = 0.2 * dynamics.stability_bound(sim)
        cfg = dynamics.StepperConfig(dt=dt, t_end=100 * dt, scheme="explicit")
        res = dynamics.run(cfg, st, p, cosine_eta(st.x), ny=16)
        assert res.status == "completed"
        e = res.trajectory.columns["E_phys"]
        assert np.all(np.diff(e) <= 1e-14)

    def test_schemes_agree_at_small_dt(self):
        p, st = flat_state(n=32)
        eta0 = cosine_eta(st.x)
        finals = {}
        for scheme in ("explicit", "semi-implicit"):
            cfg = dynamics.StepperConfig(dt=1e-5, t_end=0.01, scheme=scheme)
            finals[scheme] = dynamics.run(cfg, st, p, eta0, ny=16).sim.eta
        scale = np.max(np.abs(finals["explicit"]))
        gap = np.max(np.abs(finals["explicit"] - finals["semi-implicit"]))
        assert gap < 1e-3 * scale

    def test_semi_implicit_first_order_in_dt(self):
        p, st = flat_state(n=32)
        eta0 = cosine_eta(st.x)
        T = 0.02
        etas = []
        for dt in (4e-4, 2e-4, 1e-4):
            cfg = dynamics.StepperConfig(dt=dt, t_end=T)
            etas.append(dynamics.run(cfg, st, p, eta0, ny=16).sim.eta)
        d1n = np.linalg.norm(etas[0] - etas[1])
        d2n = np.linalg.norm(etas[1] - etas[2])
        assert 1.5 < d1n / d2n < 2.6

    def test_semi_implicit_stable_beyond_explicit_bound(self):
        p, st = flat_state(n=32)
        sim = dynamics.prepare(st, 16, p, cosine_eta(st.x))
        bound = dynamics.stability_bound(sim)
        cfg = dynamics.StepperConfig(dt=100 * bound, t_end=100 * 100 * bound)
        res = dynamics.run(cfg, st, p, cosine_eta(st.x), ny=16)
        assert res.status == "completed"
        e = res.trajectory.columns["E_par"]
        assert np.all(np.isfinite(e))
        assert np.all(np.diff(e[3:]) <= 1e-12)

    def test_stability_bound_tightens_with_resolution(self):
        p16, st16 = flat_state(n=16)
        p32, st32 = flat_state(n=32)
        b16 = dynamics.stability_bound(
            dynamics.prepare(st16, 8, p16, np.zeros(17))
        )
        b32 = dynamics.stability_bound(
            dynamics.prepare(st32, 16, p32, np.zeros(33))
        )
        assert b16 > 0 and b32 > 0
        assert 4.0 < b16 / b32 < 16.0

    def test_lagged_flux_matrix_close_to_fresh(self):
        p, st = flat_state(n=32)
        eta0 = cosine_eta(st.x)
        cfg1 = dynamics.StepperConfig(dt=1e-3, t_end=0.05, dn_refresh=1)
        cfg5 = dynamics.StepperConfig(dt=1e-3, t_end=0.05, dn_refresh=5)
        a = dynamics.run(cfg1, st, p, eta0, ny=16).sim.eta
        b = dynamics.run(cfg5, st, p, eta0, ny=16).sim.eta
        assert np.max(np.abs(a - b)) < 0.05 * np.max(np.abs(a))


class TestRunBookkeeping:
    def test_zero_horizon_single_record(self):
        p, st = flat_state(n=32)
        cfg = dynamics.StepperConfig(dt=1e-3, t_end=0.0)
        res = dynamics.run(cfg, st, p, cosine_eta(st.x), ny=16)
        assert res.status == "completed"
        assert len(res.trajectory.columns["t"]) == 1
        assert res.trajectory.summary["partial_rows"] == [0]

    def test_short_run_marks_partial_rows(self):
        p, st = flat_state(n=32)
        cfg = dynamics.StepperConfig(dt=1e-3, t_end=3e-3)
        res = dynamics.run(cfg, st, p, cosine_eta(st.x), ny=16)
        assert len(res.trajectory.columns["t"]) == 4
        assert res.trajectory.summary["partial_rows"] == [0, 1, 2, 3]

    def test_mean_is_projected(self):
        p, st = flat_state(n=32)
        eta0 = cosine_eta(st.x) + 0.003
        res = dynamics.run(
            dynamics.StepperConfig(dt=1e-3, t_end=1e-3), st, p, eta0, ny=16
        )
        assert abs(res.trajectory.summary["projected_mean"]) > 1e-4
        assert abs(res.trajectory.columns["mass"][0]) < 1e-15

    def test_blowup_reports_breakdown(self):
        p, st = flat_state(n=32)
        sim = dynamics.prepare(st, 16, p, cosine_eta(st.x))
        dt = 50 * dynamics.stability_bound(sim)
        cfg = dynamics.StepperConfig(dt=dt, t_end=400 * dt, scheme="explicit")
        res = dynamics.run(cfg, st, p, cosine_eta(st.x), ny=16)
        assert res.status == "breakdown"
        assert res.trajectory.summary["message"]
        assert 1 <= len(res.trajectory.columns["t"]) < 401

    def test_corner_mismatch_is_tracked(self):
        p, st = flat_state(n=32)
        cfg = dynamics.StepperConfig(dt=1e-3, t_end=0.01)
        res = dynamics.run(cfg, st, p, cosine_eta(st.x), ny=16)
        assert res.trajectory.summary["corner_mismatch_max"] >= 0.0


class TestConfigValidation:
    def test_bad_dt(self):
        with pytest.raises(ValueError):
            dynamics.StepperConfig(dt=0.0, t_end=1.0)

    def test_bad_scheme(self):
        with pytest.raises(ValueError):
            dynamics.StepperConfig(dt=1e-3, t_end=1.0, scheme="leapfrog")

    def test_bad_refresh(self):
        with pytest.raises(ValueError):
            dynamics.StepperConfig(dt=1e-3, t_end=1.0, dn_refresh=0)
