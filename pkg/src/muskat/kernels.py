"""Dual-path compute kernels.

Each kernel exists twice: a compiled serial loop and a vectorized numpy
equivalent.  The backend module decides which one runs.  Loops are kept
serial and in a fixed summation order so repeated runs produce identical
bits; the numpy fallbacks contract over the same trailing axis.
"""
from __future__ import annotations

import numpy as np

from .backend import HAVE_NUMBA, njit

if HAVE_NUMBA:

    @njit
    def _layer_eval_jit(E, P, Q, zeta, val, ddx, ddz):
        ni, nj, nk = E.shape
        for i in range(ni):
            for j in range(nj):
                sv = 0.0
                sx = 0.0
                sz = 0.0
                for k in range(nk):
                    e = E[i, j, k]
                    zk = zeta[k]
                    sv += e * P[i, k]
                    sx += e * zk * Q[i, k]
                    sz += e * zk * P[i, k]
                val[i, j] = sv
                ddx[i, j] = sx
                ddz[i, j] = sz

    @njit
    def _local_stiffness_jit(SH, GX, GY, WQ, c00, c01, c11, out):
        nc, nq, na = SH.shape
        for c in range(nc):
            for q in range(nq):
                a00 = 0.0
                a01 = 0.0
                a11 = 0.0
                for m in range(na):
                    s = SH[c, q, m]
                    a00 += s * c00[c, m]
                    a01 += s * c01[c, m]
                    a11 += s * c11[c, m]
                w = WQ[c, q]
                for a in range(na):
                    fx = a00 * GX[c, q, a] + a01 * GY[c, q, a]
                    fy = a01 * GX[c, q, a] + a11 * GY[c, q, a]
                    for b in range(na):
                        out[c, a, b] += w * (
                            fx * GX[c, q, b] + fy * GY[c, q, b]
                        )


def layer_eval(E, P, Q, zeta):
    """Contract mode tables against per-column coefficients.

    Returns the harmonic field, its spectral x-derivative, and its
    z-derivative on the (column, row) node grid.
    """
    if HAVE_NUMBA:
        ni, nj, _ = E.shape
        val = np.empty((ni, nj))
        ddx = np.empty((ni, nj))
        ddz = np.empty((ni, nj))
        _layer_eval_jit(E, P, Q, zeta, val, ddx, ddz)
        return val, ddx, ddz
    val = np.einsum("ijk,ik->ij", E, P)
    ddx = np.einsum("ijk,ik->ij", E, Q * zeta)
    ddz = np.einsum("ijk,ik->ij", E, P * zeta)
    return val, ddx, ddz


def local_stiffness(SH, GX, GY, WQ, c00, c01, c11):
    """Per-cell stiffness blocks for the symmetric coefficient field.

    c00, c01, c11 hold the matrix entries gathered to cell-local nodes;
    the field is interpolated to quadrature points with the same bilinear
    shapes used for the solution.
    """
    if HAVE_NUMBA:
        out = np.zeros((SH.shape[0], SH.shape[2], SH.shape[2]))
        _local_stiffness_jit(SH, GX, GY, WQ, c00, c01, c11, out)
        return out
    a00 = np.einsum("cqm,cm->cq", SH, c00)
    a01 = np.einsum("cqm,cm->cq", SH, c01)
    a11 = np.einsum("cqm,cm->cq", SH, c11)
    fx = a00[..., None] * GX + a01[..., None] * GY
    fy = a01[..., None] * GX + a11[..., None] * GY
    out = np.einsum("cq,cqa,cqb->cab", WQ, GX, fx)
    out += np.einsum("cq,cqa,cqb->cab", WQ, GY, fy)
    return out
