"""Harmonic carrier of surface data into the stationary layer.

Surface perturbations live on I = [-1, 1]; bulk coefficients live on the
fixed stationary domain.  The bridge has three stages.  First the surface
function is extended: even reflection across both contact points followed
by a quintic taper to zero over the outer half of the padding, which keeps
the extension exact on I and periodizable on the padded interval.  Second
the extension is expanded in Fourier modes and each mode is multiplied by
exp(zeta * z), z = y - h_s(x) <= 0, which realizes the half-plane Poisson
integral spectrally: the result is harmonic in (x, z) by construction and
its gradient costs nothing beyond mode-wise factors.  Third, a vertical
cutoff that vanishes near the vessel bottom and equals one near the
surface localizes the shift, and the transformed-flow coefficient fields
are assembled from the cutoff extension.

det J = 1 + xi' eta+ + xi d_y eta+ measures how far the vertical shear
map is from the identity; it must stay positive, and the assembled matrix
field satisfies det A = 1 and A = detJ Sigma^T Sigma as exact algebraic
identities, which downstream tests lean on.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import FloatArray
from .stationary import GeometryError

_token_counter = itertools.count()


class BreakdownError(RuntimeError):
    """The vertical shear map lost injectivity: det J <= 0 at a node."""


def _smoothstep(t: FloatArray) -> FloatArray:
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep_deriv(t: FloatArray) -> FloatArray:
    return 30.0 * (t * (1.0 - t)) ** 2


def extend(eta: FloatArray, pad: int | None = None):
    """Reflect surface data across x = +-1 and taper the outer pad to zero.

    Returns the padded node coordinates and values.  pad counts nodes per
    side and defaults to half the surface grid, doubling the interval.
    """
    eta = np.asarray(eta, dtype=float)
    n = eta.size - 1
    if n < 4 or n % 2:
        raise ValueError("surface grid must have an even cell count >= 4")
    if pad is None:
        pad = n // 2
    if pad < n // 2:
        raise ValueError("pad must cover at least half the interval")
    if pad > n:
        raise ValueError("pad beyond one reflected copy is not defined")
    dx = 2.0 / n
    x = -1.0 + dx * np.arange(-pad, n + pad + 1)
    vals = np.concatenate([eta[pad:0:-1], eta, eta[n - 1 : n - pad - 1 : -1]])
    half = 0.5 * pad * dx
    t = np.clip((1.0 + 2.0 * half - np.abs(x)) / half, 0.0, 1.0)
    vals = vals * _smoothstep(t)
    return x, vals


@dataclass(frozen=True)
class SpectralSurface:
    """Real Fourier modes of a periodized surface extension."""

    x0: float
    period: float
    zeta: FloatArray
    a: FloatArray
    b: FloatArray

    @classmethod
    def from_samples(cls, x: FloatArray, vals: FloatArray) -> "SpectralSurface":
        m = x.size - 1
        if m % 2:
            raise ValueError("padded grid must have an even cell count")
        period = float(x[-1] - x[0])
        F = np.fft.rfft(vals[:-1])
        zeta = 2.0 * np.pi * np.arange(F.size) / period
        a = 2.0 * F.real / m
        b = -2.0 * F.imag / m
        a[0] *= 0.5
        a[-1] *= 0.5
        b[-1] = 0.0
        return cls(x0=float(x[0]), period=period, zeta=zeta, a=a, b=b)

    def eval(self, xq, zq):
        """Field, x-derivative and z-derivative at arbitrary points, z <= 0."""
        xq = np.asarray(xq, dtype=float)
        zq = np.asarray(zq, dtype=float)
        if np.any(zq > 1e-12):
            raise RuntimeError("evaluation point above the surface line")
        ph = self.zeta * (xq[..., None] - self.x0)
        E = np.exp(np.minimum(zq[..., None], 0.0) * self.zeta)
        c = np.cos(ph)
        s = np.sin(ph)
        P = self.a * c + self.b * s
        Q = self.b * c - self.a * s
        v = np.sum(E * P, axis=-1)
        ddx = np.sum(E * self.zeta * Q, axis=-1)
        ddz = np.sum(E * self.zeta * P, axis=-1)
        return v, ddx, ddz


@dataclass(frozen=True)
class HarmonicExtension:
    """Poisson extension of a surface function, sampled on a layer mesh."""

    value: FloatArray
    ddx: FloatArray
    ddz: FloatArray
    spectral: SpectralSurface
    sup_ratio: float

    @property
    def trace(self) -> FloatArray:
        return self.value[:, -1]


def _mesh_tables(mesh, spec: SpectralSurface):
    key = (spec.zeta.size, spec.x0, spec.period)
    cached = mesh._harmonic_tables.get(key)
    if cached is None:
        if np.any(mesh.Z > 1e-12):
            raise RuntimeError("mesh node above the stationary surface")
        Z = np.minimum(mesh.Z, 0.0)
        E = np.exp(Z[:, :, None] * spec.zeta[None, None, :])
        ph = spec.zeta[None, :] * (mesh.x[:, None] - spec.x0)
        cached = (E, np.cos(ph), np.sin(ph))
        mesh._harmonic_tables[key] = cached
    return cached


def poisson_extend(eeta, mesh) -> HarmonicExtension:
    """Evaluate the harmonic extension and its gradient on mesh nodes.

    eeta is the (x, values) pair produced by extend().  The x-derivative
    returned is the full derivative along mesh rows, including the chain
    term from the depth coordinate z = y - h_s(x).
    """
    if isinstance(eeta, SpectralSurface):
        spec = eeta
    else:
        spec = SpectralSurface.from_samples(*eeta)
    E, C, S = _mesh_tables(mesh, spec)
    P = np.ascontiguousarray(spec.a * C + spec.b * S)
    Q = np.ascontiguousarray(spec.b * C - spec.a * S)
    val, ddx_spec, ddz = kernels.layer_eval(E, P, Q, spec.zeta)
    ddx = ddx_spec - mesh.hs_slope[:, None] * ddz
    trace_scale = float(np.max(np.abs(val[:, -1])))
    sup_ratio = float(np.max(np.abs(val))) / trace_scale if trace_scale > 0 else 1.0
    return HarmonicExtension(
        value=val, ddx=ddx, ddz=ddz, spectral=spec, sup_ratio=sup_ratio
    )


@dataclass(frozen=True)
class Cutoff:
    """Quintic vertical smoothstep: 0 near the bottom, 1 near the surface."""

    y_lo: float
    y_hi: float

    def __call__(self, y):
        t = np.clip(
            (np.asarray(y, dtype=float) - self.y_lo) / (self.y_hi - self.y_lo),
            0.0,
            1.0,
        )
        return _smoothstep(t)

    def deriv(self, y):
        width = self.y_hi - self.y_lo
        t = np.clip((np.asarray(y, dtype=float) - self.y_lo) / width, 0.0, 1.0)
        return _smoothstep_deriv(t) / width


def cutoff_xi(vessel, hs: FloatArray) -> Cutoff:
    """Cutoff with plateaus a quarter-gap away from bottom and surface."""
    top = float(np.min(hs))
    bot = float(np.max(vessel.hw))
    d = top - bot
    if d <= 0:
        raise GeometryError("surface touches the vessel bottom")
    return Cutoff(y_lo=bot + 0.25 * d, y_hi=top - 0.25 * d)


@dataclass(frozen=True)
class CoeffFields:
    """Transformed-flow coefficients on mesh nodes.

    p is the sheared horizontal derivative xi * d_x eta+; the matrix
    entries are algebraic in (detj, p), so det A = 1 holds exactly.
    """

    detj: FloatArray
    p: FloatArray
    xi: FloatArray
    a00: FloatArray
    a01: FloatArray
    a11: FloatArray
    s01: FloatArray
    s11: FloatArray
    token: int
    detj_band_ok: bool

    @classmethod
    def identity(cls, mesh) -> "CoeffFields":
        shape = mesh.Y.shape
        one = np.ones(shape)
        zero = np.zeros(shape)
        return cls(
            detj=one,
            p=zero,
            xi=one.copy(),
            a00=one.copy(),
            a01=zero.copy(),
            a11=one.copy(),
            s01=zero.copy(),
            s11=one.copy(),
            token=next(_token_counter),
            detj_band_ok=True,
        )

    @property
    def sigma(self) -> FloatArray:
        out = np.zeros(self.detj.shape + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 0, 1] = self.s01
        out[..., 1, 1] = self.s11
        return out

    @property
    def amat(self) -> FloatArray:
        out = np.empty(self.detj.shape + (2, 2))
        out[..., 0, 0] = self.a00
        out[..., 0, 1] = self.a01
        out[..., 1, 0] = self.a01
        out[..., 1, 1] = self.a11
        return out


def assemble_coeffs(ext: HarmonicExtension, xi: Cutoff, mesh) -> CoeffFields:
    """Build Sigma, A and det J from the cutoff harmonic extension.

    Aborts with BreakdownError when det J <= 0 anywhere: clamping would
    silently break every downstream identity, so the step must be redone
    with smaller data instead.
    """
    xs = xi(mesh.Y)
    dxs = xi.deriv(mesh.Y)
    p = xs * ext.ddx
    detj = 1.0 + dxs * ext.value + xs * ext.ddz
    dmin = float(detj.min())
    if dmin <= 0.0:
        raise BreakdownError(
            f"det J reached {dmin:.3e}: surface data too large for the shear map"
        )
    band_ok = bool(dmin >= 0.25 and float(detj.max()) <= 4.0)
    return CoeffFields(
        detj=detj,
        p=p,
        xi=xs,
        a00=detj,
        a01=-p,
        a11=(1.0 + p * p) / detj,
        s01=-p / detj,
        s11=1.0 / detj,
        token=next(_token_counter),
        detj_band_ok=band_ok,
    )
