"""Reference problems with known answers for the elliptic stack.

Every benchmark returns plain records so the validation CLI can dump them
to CSV and the test suite can assert on the same numbers.  The wedge case
probes the corner regularity directly: a stationary meniscus that meets
the wall at interior angle omega supports the local harmonic mode
r^(pi/omega) cos(pi theta/omega) with zero conormal flux on both edges,
so imposing that mode's data on the remaining boundary and fitting the
gradient magnitude against the corner distance recovers the exponent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import elliptic
from .core import VesselGeometry, surface_grid
from .diffeo import CoeffFields


def _flat_mesh(n: int, ny: int | None = None) -> elliptic.Mesh:
    vessel = VesselGeometry.from_callable(lambda x: -np.ones_like(x), n)
    hs = np.ones(n + 1)
    return elliptic.build_mesh(vessel, hs, ny or n, hs_slope=np.zeros(n + 1))


def _l2(mesh: elliptic.Mesh, err: np.ndarray) -> float:
    return float(np.sqrt(np.sum(mesh.lumped_area * err**2)))


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    error: float
    order: float


def _with_orders(ns, errs) -> list[ConvergenceRow]:
    rows = []
    for k, (n, e) in enumerate(zip(ns, errs)):
        order = float("nan") if k == 0 else float(np.log2(errs[k - 1] / e))
        rows.append(ConvergenceRow(n=n, error=float(e), order=order))
    return rows


def mixed_convergence(ns=(16, 32, 64, 128)) -> list[ConvergenceRow]:
    """L2 error of the mixed solve against a separable harmonic field."""
    errs = []
    for n in ns:
        mesh = _flat_mesh(n)
        op = elliptic.Operator(mesh, CoeffFields.identity(mesh))
        X = mesh.coords[:, 0]
        Y = mesh.coords[:, 1]
        exact = np.cos(np.pi * X / 2) * np.cosh(np.pi * (Y + 1) / 2)
        wall = {
            "left": -(np.pi / 2) * np.cosh(np.pi * (mesh.Y[0] + 1) / 2),
            "right": -(np.pi / 2) * np.cosh(np.pi * (mesh.Y[-1] + 1) / 2),
        }
        b = op.load_vector(g2=wall)
        phi = op.solve_dirichlet(exact[mesh.gamma_ids], b)
        errs.append(_l2(mesh, phi - exact))
    return _with_orders(ns, errs)


def neumann_convergence(ns=(16, 32, 64)) -> list[ConvergenceRow]:
    """L2 error of the zero-mean Neumann solve against a separable field."""
    errs = []
    for n in ns:
        mesh = _flat_mesh(n)
        op = elliptic.Operator(mesh, CoeffFields.identity(mesh))
        X = mesh.coords[:, 0]
        Y = mesh.coords[:, 1]
        exact = np.cos(np.pi * X) * np.cosh(np.pi * (Y + 1)) / np.cosh(2 * np.pi)
        exact = exact - np.sum(mesh.lumped_area * exact) / mesh.area
        g1 = np.pi * np.tanh(2 * np.pi) * np.cos(np.pi * mesh.x)
        phi, _ = op.solve_neumann(g1=g1)
        errs.append(_l2(mesh, phi - exact))
    return _with_orders(ns, errs)


def dn_symbol_convergence(ns=(32, 64, 128), mode: int = 1) -> list[ConvergenceRow]:
    """Nodewise error of the flux map against the flat-layer symbol.

    On a layer of depth 2 the datum cos(k pi x) must map to
    k pi tanh(2 k pi) cos(k pi x).
    """
    errs = []
    k = mode * np.pi
    for n in ns:
        mesh = _flat_mesh(n, ny=n)
        q = elliptic.dn_apply(CoeffFields.identity(mesh), mesh, np.cos(k * mesh.x))
        exact = k * np.tanh(2 * k) * np.cos(k * mesh.x)
        errs.append(float(np.abs(q - exact).max()))
    return _with_orders(ns, errs)


@dataclass(frozen=True)
class WedgeResult:
    omega: float
    exponent_exact: float
    exponent_fit: float
    rel_error: float
    l2_error: float
    compat_defect: float


def _wedge_problem(omega: float, n: int):
    alpha = np.pi / omega
    slope = -1.0 / np.tan(omega)
    x = surface_grid(n)
    hs = 1.0 + slope * (x + 1.0)
    mesh = elliptic.Mesh(x, -np.ones(n + 1), hs, np.full(n + 1, slope), ny=n)

    amp = 2e-4

    def wpow(px, py, expo):
        w = (1.0 - py) + 1j * (px + 1.0)
        return amp * w**expo

    def value(px, py):
        return np.real(wpow(px, py, alpha))

    def grad(px, py):
        wp = alpha * wpow(px, py, alpha - 1.0)
        return -np.imag(wp), -np.real(wp)

    return mesh, alpha, value, grad


def wedge_exponent(omega: float, n: int = 64) -> WedgeResult:
    """Recover the corner exponent pi/omega from a Neumann solve.

    The surface is the straight meniscus meeting the left wall at
    interior angle omega; the wall and the surface carry the mode's own
    zero flux, the bottom and the far wall carry its exact conormal data.
    """
    mesh, alpha, value, grad = _wedge_problem(omega, n)
    op = elliptic.Operator(mesh, CoeffFields.identity(mesh))

    bx = mesh.coords[mesh.side_nodes["bottom"], 0]
    by = mesh.coords[mesh.side_nodes["bottom"], 1]
    gx, gy = grad(bx, by)
    g_bottom = -gy
    rx = mesh.coords[mesh.side_nodes["right"], 0]
    ry = mesh.coords[mesh.side_nodes["right"], 1]
    gx, gy = grad(rx, ry)
    g_right = gx
    phi, defect = op.solve_neumann(
        g1=np.zeros(mesh.nx + 1), g2={"bottom": g_bottom, "right": g_right}
    )

    qx = elliptic.qp_interp(mesh, mesh.coords[:, 0])
    qy = elliptic.qp_interp(mesh, mesh.coords[:, 1])
    gxh, gyh = elliptic.qp_gradient(mesh, phi)
    r = np.hypot(qx + 1.0, qy - 1.0)
    h = 2.0 / n
    sel = (r > 3 * h) & (r < 0.3)
    s, _ = np.polyfit(np.log(r[sel]), np.log(np.hypot(gxh, gyh)[sel]), 1)
    fit = float(s) + 1.0

    exact = value(mesh.coords[:, 0], mesh.coords[:, 1])
    exact = exact - np.sum(mesh.lumped_area * exact) / mesh.area
    l2 = _l2(mesh, phi - exact)
    return WedgeResult(
        omega=float(omega),
        exponent_exact=float(alpha),
        exponent_fit=fit,
        rel_error=abs(fit - alpha) / alpha,
        l2_error=l2,
        compat_defect=float(defect),
    )


def wedge_convergence(omega: float, ns=(32, 64)) -> list[ConvergenceRow]:
    errs = []
    for n in ns:
        mesh, alpha, value, grad = _wedge_problem(omega, n)
        op = elliptic.Operator(mesh, CoeffFields.identity(mesh))
        bx = mesh.coords[mesh.side_nodes["bottom"], 0]
        by = mesh.coords[mesh.side_nodes["bottom"], 1]
        g_bottom = -grad(bx, by)[1]
        rx = mesh.coords[mesh.side_nodes["right"], 0]
        ry = mesh.coords[mesh.side_nodes["right"], 1]
        g_right = grad(rx, ry)[0]
        phi, _ = op.solve_neumann(
            g1=np.zeros(mesh.nx + 1), g2={"bottom": g_bottom, "right": g_right}
        )
        exact = value(mesh.coords[:, 0], mesh.coords[:, 1])
        exact = exact - np.sum(mesh.lumped_area * exact) / mesh.area
        errs.append(_l2(mesh, phi - exact))
    return _with_orders(ns, errs)
