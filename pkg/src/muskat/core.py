"""Model primitives shared by every solver stage.

Physical parameters, the sampled vessel bottom, second-order difference
stencils with one-sided closures at the contact points x = -1 and x = 1,
graph curvature, and the Taylor remainder of the slope flux
f(z) = z / sqrt(1 + z^2).  The remainder family feeds both the surface
Dirichlet data and the energy bookkeeping, so every partial derivative
used anywhere in the code base is defined here in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import numpy.typing as npt

import scipy.sparse as sp

FloatArray = npt.NDArray[np.float64]

GL10_NODES = np.polynomial.legendre.leggauss(10)[0]
GL10_WEIGHTS = np.polynomial.legendre.leggauss(10)[1]


def surface_grid(n: int) -> FloatArray:
    """Uniform nodes on [-1, 1], endpoints included; n even, n >= 8."""
    if n < 8 or n % 2:
        raise ValueError(f"surface grid needs even n >= 8, got n={n}")
    return np.linspace(-1.0, 1.0, n + 1)


@dataclass(frozen=True)
class PhysParams:
    """Gravity g, surface tension sigma, wetting-energy jump, total mass.

    Partial wetting requires |gamma_jump| < sigma; the equilibrium contact
    angle is arccos(gamma_jump / sigma).
    """

    g: float
    sigma: float
    gamma_jump: float
    mass: float

    def __post_init__(self) -> None:
        if not (self.g > 0.0 and np.isfinite(self.g)):
            raise ValueError(f"g must be positive, got {self.g}")
        if not (self.sigma > 0.0 and np.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not abs(self.gamma_jump) < self.sigma:
            raise ValueError(
                f"partial wetting requires |gamma_jump| < sigma, got "
                f"gamma_jump={self.gamma_jump}, sigma={self.sigma}"
            )
        if not (self.mass > 0.0 and np.isfinite(self.mass)):
            raise ValueError(f"mass must be positive, got {self.mass}")


@dataclass(frozen=True)
class VesselGeometry:
    """Lower wall y = h_w(x) sampled on the surface grid.

    The analytic profile is kept so the wall can be resampled when a run
    and a convergence study share one geometry at different resolutions.
    """

    x: FloatArray
    hw: FloatArray
    fn: Callable[[FloatArray], FloatArray] | None = None

    def __post_init__(self) -> None:
        if self.x.shape != self.hw.shape or self.x.ndim != 1:
            raise ValueError("x and hw must be 1-d arrays of equal length")
        if not np.all(np.isfinite(self.hw)):
            raise ValueError("wall profile contains non-finite samples")

    @classmethod
    def from_callable(cls, fn: Callable, n: int) -> "VesselGeometry":
        x = surface_grid(n)
        hw = np.asarray(fn(x), dtype=float) * np.ones_like(x)
        return cls(x=x, hw=hw, fn=fn)

    @property
    def n(self) -> int:
        return self.x.size - 1

    def resample(self, n: int) -> "VesselGeometry":
        if self.fn is None:
            raise ValueError("geometry built from raw samples cannot resample")
        return VesselGeometry.from_callable(self.fn, n)


# ---------------------------------------------------------------------------
# difference stencils


def d1(f: FloatArray, dx: float) -> FloatArray:
    """First derivative: centered interior, one-sided O(dx^2) at the ends."""
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * dx)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * dx)
    return out


def d2(f: FloatArray, dx: float) -> FloatArray:
    """Second derivative: centered interior, one-sided O(dx^2) at the ends."""
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / dx**2
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / dx**2
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / dx**2
    return out


def d1_matrix(n: int, dx: float) -> sp.csr_matrix:
    """Matrix form of :func:`d1` on n+1 nodes."""
    rows, cols, vals = [], [], []
    for i in range(1, n):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-0.5 / dx, 0.5 / dx]
    rows += [0, 0, 0]
    cols += [0, 1, 2]
    vals += [-1.5 / dx, 2.0 / dx, -0.5 / dx]
    rows += [n, n, n]
    cols += [n, n - 1, n - 2]
    vals += [1.5 / dx, -2.0 / dx, 0.5 / dx]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n + 1))


def curvature(f: FloatArray, dx: float) -> FloatArray:
    """Graph curvature f'' / (1 + f'^2)^(3/2)."""
    f = np.asarray(f, dtype=float)
    if f.size < 9:
        raise ValueError(f"curvature needs at least 9 nodes, got {f.size}")
    if not np.all(np.isfinite(f)):
        raise ValueError("curvature input contains non-finite values")
    fp = d1(f, dx)
    return d2(f, dx) / (1.0 + fp**2) ** 1.5


# ---------------------------------------------------------------------------
# slope flux and its Taylor remainder


def slope_flux(z):
    """f(z) = z / sqrt(1 + z^2); curvature of a graph is (f(h'))'."""
    return z / np.sqrt(1.0 + z * z)


def _f1(u):
    return (1.0 + u * u) ** -1.5


def _f2(u):
    return -3.0 * u * (1.0 + u * u) ** -2.5


def _f3(u):
    return (12.0 * u * u - 3.0) * (1.0 + u * u) ** -3.5


def remainder_R(z1, z2):
    """Second-order Taylor remainder of the slope flux at z1.

    R(z1, z2) = f(z1 + z2) - f(z1) - z2 f'(z1); quadratic in z2 near 0.
    """
    return slope_flux(z1 + z2) - slope_flux(z1) - z2 * _f1(z1)


def dz2_R(z1, z2):
    return _f1(z1 + z2) - _f1(z1)


def d2z2_R(z1, z2):
    return _f2(z1 + z2)


def d3z2_R(z1, z2):
    return _f3(z1 + z2)


def dz1_R(z1, z2):
    return _f1(z1 + z2) - _f1(z1) - z2 * _f2(z1)


def dz1dz2_R(z1, z2):
    return _f2(z1 + z2) - _f2(z1)


def d2z2dz1_R(z1, z2):
    return _f3(z1 + z2)


def d2z1_R(z1, z2):
    return _f2(z1 + z2) - _f2(z1) - z2 * _f3(z1)


def integral_R(z1, z2, tol: float = 1e-10):
    """Integral of R(z1, s) ds from 0 to z2, elementwise.

    Adaptive Gauss-Legendre: composite 10-point panels, doubled until the
    worst entry moves by less than tol in absolute value.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    shape = np.broadcast_shapes(z1.shape, z2.shape)
    z1 = np.broadcast_to(z1, shape)
    z2 = np.broadcast_to(z2, shape)

    def composite(panels: int):
        edges = np.linspace(0.0, 1.0, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        u = (mid[:, None] + half * GL10_NODES[None, :]).ravel()
        w = np.broadcast_to(half * GL10_WEIGHTS[None, :], (panels, 10)).ravel()
        s = z2[..., None] * u
        vals = remainder_R(z1[..., None], s)
        return z2 * (vals * w).sum(axis=-1)

    prev = composite(1)
    for panels in (2, 4, 8, 16, 32, 64):
        cur = composite(panels)
        if np.max(np.abs(cur - prev)) <= tol:
            return cur
        prev = cur
    return prev


def _check_same_grid(*arrays) -> None:
    shapes = {np.shape(a) for a in arrays if a is not None}
    if len(shapes) > 1:
        raise ValueError(f"inputs live on mismatched grids: {sorted(shapes)}")


def residual_Q(
    j: int,
    hs_slope,
    deta,
    dt_deta=None,
    dtt_deta=None,
    tol: float = 1e-10,
):
    """Residual energy density Q_j entering the order-j identity bracket."""
    _check_same_grid(hs_slope, deta, dt_deta, dtt_deta)
    if j == 0:
        return integral_R(hs_slope, deta, tol=tol)
    if j == 1:
        return 0.5 * dt_deta**2 * dz2_R(hs_slope, deta)
    if j == 2:
        return 0.5 * dtt_deta**2 * dz2_R(hs_slope, deta) + (
            dtt_deta * dt_deta**2 * d2z2_R(hs_slope, deta)
        )
    raise ValueError(f"residual_Q defined for j in {{0, 1, 2}}, got {j}")


def source_calF(j: int, hs_slope, deta, dt_deta, dtt_deta=None):
    """Surface source density of the order-j identity (zero for j = 0)."""
    _check_same_grid(hs_slope, deta, dt_deta, dtt_deta)
    if j == 0:
        return np.zeros_like(np.asarray(deta, dtype=float))
    if j == 1:
        return 0.5 * dt_deta**3 * d2z2_R(hs_slope, deta)
    if j == 2:
        return 2.5 * dtt_deta**2 * dt_deta * d2z2_R(hs_slope, deta) + (
            dtt_deta * dt_deta**3 * d3z2_R(hs_slope, deta)
        )
    raise ValueError(f"source_calF defined for j in {{0, 1, 2}}, got {j}")
