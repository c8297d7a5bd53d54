"""Stationary meniscus: closed-form potential, shooting, contact angles."""
import numpy as np
import pytest

from muskat import core
from muskat.core import PhysParams, VesselGeometry
from muskat.stationary import (
    GeometryError,
    contact_angle,
    phi_s_closed_form,
    solve_stationary,
)


def flat_vessel(level=-1.0, n=64):
    return VesselGeometry.from_callable(lambda x: level * np.ones_like(x), n)


class TestPhiS:
    def test_flat_reference(self):
        p = PhysParams(g=1.0, sigma=1.0, gamma_jump=0.0, mass=4.0)
        assert phi_s_closed_form(p, flat_vessel()) == pytest.approx(-1.0, abs=1e-14)

    def test_wetting_jump(self):
        p = PhysParams(g=1.0, sigma=1.0, gamma_jump=0.5, mass=2.0)
        assert phi_s_closed_form(p, flat_vessel(level=0.0)) == pytest.approx(
            -0.5, abs=1e-14
        )

    def test_vanishing_mass_limit(self):
        p = PhysParams(g=2.0, sigma=1.0, gamma_jump=0.0, mass=1e-12)
        assert phi_s_closed_form(p, flat_vessel(level=0.0)) == pytest.approx(
            0.0, abs=1e-11
        )


class TestFlatCase:
    def test_exactly_flat(self):
        p = PhysParams(g=1.0, sigma=1.0, gamma_jump=0.0, mass=4.0)
        st = solve_stationary(p, flat_vessel(n=128), 128)
        assert st.phi_s == pytest.approx(-1.0, abs=1e-14)
        assert np.max(np.abs(st.hs - 1.0)) < 1e-8
        assert np.max(np.abs(st.hs_slope)) < 1e-10
        assert st.omega == pytest.approx(np.pi / 2, abs=1e-10)
        assert abs(st.mass_residual) < 1e-10


class TestCurvedMenisci:
    @pytest.mark.parametrize("jump,sign", [(-0.5, -1.0), (0.5, 1.0)])
    def test_concavity_and_evenness(self, jump, sign):
        p = PhysParams(g=1.0, sigma=1.0, gamma_jump=jump, mass=4.0)
        st = solve_stationary(p, flat_vessel(n=256), 256)
        dx = st.dx
        # interior second derivative has one sign: concave for negative
        # wetting jump, convex for positive
        hpp = core.d2(st.hs, dx)[4:-4]
        assert np.all(sign * hpp > 0.0)
        assert np.max(np.abs(st.hs - st.hs[::-1])) < 1e-10
        assert abs(st.mass_residual) < 1e-8

    @pytest.mark.parametrize("ratio", [0.5, -0.5, 0.25, -0.25])
    def test_youngs_law(self, ratio):
        p = PhysParams(g=1.0, sigma=1.0, gamma_jump=ratio, mass=4.0)
        st = solve_stationary(p, flat_vessel(n=256), 256)
        omega = contact_angle(st)
        assert 0.0 < omega < np.pi
        assert abs(np.cos(omega) - ratio) < 1e-6

    def test_named_angles(self):
        p = PhysParams(g=1.0, sigma=1.0, gamma_jump=0.5, mass=4.0)
        st = solve_stationary(p, flat_vessel(n=256), 256)
        assert contact_angle(st) == pytest.approx(np.pi / 3, abs=1e-6)
        p = PhysParams(g=1.0, sigma=1.0, gamma_jump=-0.5, mass=4.0)
        st = solve_stationary(p, flat_vessel(n=256), 256)
        assert contact_angle(st) == pytest.approx(2 * np.pi / 3, abs=1e-6)

    def test_ode_residual_second_order(self):
        p = PhysParams(g=1.0, sigma=1.0, gamma_jump=0.4, mass=4.0)
        errs, ns = [], [64, 128, 256, 512]
        for n in ns:
            st = solve_stationary(p, flat_vessel(n=n), n)
            res = -p.g * st.hs + p.sigma * core.curvature(st.hs, st.dx) - st.phi_s
            errs.append(np.max(np.abs(res)))
        order = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert order > 1.9

    def test_curved_wall(self):
        p = PhysParams(g=1.0, sigma=1.0, gamma_jump=0.2, mass=4.0)
        ves = VesselGeometry.from_callable(lambda x: -1.0 + 0.15 * x**2, 256)
        st = solve_stationary(p, ves, 256)
        assert abs(st.mass_residual) < 1e-8
        assert st.hs.min() > ves.hw.max()


class TestFailureModes:
    def test_pinching_reported(self):
        p = PhysParams(g=1.0, sigma=1.0, gamma_jump=0.0, mass=0.1)
        ves = VesselGeometry.from_callable(lambda x: 0.3 * np.cos(np.pi * x), 64)
        with pytest.raises(GeometryError):
            solve_stationary(p, ves, 64)

    def test_odd_n_rejected(self):
        p = PhysParams(g=1.0, sigma=1.0, gamma_jump=0.0, mass=4.0)
        with pytest.raises(ValueError):
            solve_stationary(p, flat_vessel(), 65)
