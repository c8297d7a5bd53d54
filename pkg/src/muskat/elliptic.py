"""Finite elements on the terrain-following layer mesh.

The stationary fluid layer sits between the vessel bottom and the
stationary meniscus.  A logical tensor grid on I x [0,1] is mapped to
physical nodes (x, h_w + s*(h_s - h_w)), giving bilinear quadrilateral
cells whose top row of nodes coincides with the 1D surface grid.  All
elliptic work happens here: the mixed problem with Dirichlet data on the
surface and natural conditions on the walls, the pure Neumann problem in
a zero-mean gauge, and the Dirichlet-to-Neumann map obtained by probing
one cached factorization with nodal basis data.

Flux recovery is variational: the conormal flux on the surface is the
residual of the bulk form against surface test functions, divided by
lumped arc weights in the horizontal measure.  That is the quantity the
evolution equation pairs with, and it stays meaningful at the contact
corners where pointwise gradients degrade.

Interior unknowns are ordered column-major along the short direction, so
after eliminating the Dirichlet rows the stiffness matrix is banded with
bandwidth N_y + 2 and a Cholesky factorization in band storage beats a
general sparse factorization by about a factor five at production sizes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .core import FloatArray, d1
from .stationary import GeometryError


class SolveError(RuntimeError):
    """Linear algebra failure in an elliptic solve."""


class CompatibilityError(ValueError):
    """Neumann data violate the solvability condition beyond repair."""


_GP = 1.0 / np.sqrt(3.0)
_QPTS = np.array([[-_GP, -_GP], [_GP, -_GP], [_GP, _GP], [-_GP, _GP]])
_EDGE_QP = np.array([-_GP, _GP])


def _shape_ref(xi: float, et: float):
    vals = 0.25 * np.array(
        [
            (1 - xi) * (1 - et),
            (1 + xi) * (1 - et),
            (1 + xi) * (1 + et),
            (1 - xi) * (1 + et),
        ]
    )
    grads = 0.25 * np.array(
        [
            [-(1 - et), -(1 - xi)],
            [(1 - et), -(1 + xi)],
            [(1 + et), (1 + xi)],
            [-(1 + et), (1 - xi)],
        ]
    )
    return vals, grads


class Mesh:
    """Terrain-following quadrilateral mesh of the stationary layer."""

    def __init__(
        self,
        x: FloatArray,
        hw: FloatArray,
        hs: FloatArray,
        hs_slope: FloatArray,
        ny: int,
    ) -> None:
        x = np.asarray(x, dtype=float)
        hw = np.asarray(hw, dtype=float)
        hs = np.asarray(hs, dtype=float)
        hs_slope = np.asarray(hs_slope, dtype=float)
        if ny < 1:
            raise ValueError("ny must be at least 1")
        if x.ndim != 1 or x.size < 3:
            raise ValueError("need at least three surface nodes")
        if not (hw.shape == hs.shape == hs_slope.shape == x.shape):
            raise ValueError("surface arrays must share the grid")
        thick = hs - hw
        if np.any(thick <= 0):
            raise GeometryError("layer thickness vanishes: h_s <= h_w")

        self.x = x
        self.hw = hw
        self.hs = hs
        self.hs_slope = hs_slope
        self.nx = x.size - 1
        self.ny = ny
        self.s = np.linspace(0.0, 1.0, ny + 1)
        Y = hw[:, None] + self.s[None, :] * thick[:, None]
        Y[:, 0] = hw
        Y[:, -1] = hs
        self.Y = Y
        self.Z = Y - hs[:, None]
        self.nnodes = (self.nx + 1) * (ny + 1)
        self.coords = np.column_stack(
            [np.repeat(x, ny + 1), Y.ravel()]
        )
        self._build_cells()
        self._build_pattern()
        self._build_boundary()
        self._harmonic_tables: dict[int, tuple] = {}

    # node id layout: id = i*(ny+1) + j, j fastest

    def node_id(self, i, j):
        return i * (self.ny + 1) + j

    def _build_cells(self) -> None:
        nx, ny = self.nx, self.ny
        ci, cj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        ci = ci.ravel()
        cj = cj.ravel()
        n00 = ci * (ny + 1) + cj
        self.conn = np.column_stack(
            [n00, n00 + (ny + 1), n00 + (ny + 2), n00 + 1]
        )
        self.ncell = self.conn.shape[0]

        pts = self.coords[self.conn]
        SH = np.empty((self.ncell, 4, 4))
        GX = np.empty((self.ncell, 4, 4))
        GY = np.empty((self.ncell, 4, 4))
        WQ = np.empty((self.ncell, 4))
        for q, (xi, et) in enumerate(_QPTS):
            vals, gref = _shape_ref(xi, et)
            J = np.einsum("cad,ae->cde", pts, gref)
            det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            if np.any(det <= 0):
                raise GeometryError("degenerate cell in terrain map")
            inv00 = J[:, 1, 1] / det
            inv01 = -J[:, 0, 1] / det
            inv10 = -J[:, 1, 0] / det
            inv11 = J[:, 0, 0] / det
            SH[:, q, :] = vals[None, :]
            GX[:, q, :] = inv00[:, None] * gref[None, :, 0] + inv10[
                :, None
            ] * gref[None, :, 1]
            GY[:, q, :] = inv01[:, None] * gref[None, :, 0] + inv11[
                :, None
            ] * gref[None, :, 1]
            WQ[:, q] = det
        self.SH, self.GX, self.GY, self.WQ = SH, GX, GY, WQ

        m = np.zeros(self.nnodes)
        np.add.at(
            m, self.conn.ravel(), np.einsum("cq,cqa->ca", WQ, SH).ravel()
        )
        self.lumped_area = m
        self.area = float(m.sum())

    def _build_pattern(self) -> None:
        rows = np.repeat(self.conn, 4, axis=1).ravel()
        cols = np.tile(self.conn, (1, 4)).ravel()
        pattern = sp.coo_matrix(
            (np.ones(rows.size), (rows, cols)),
            shape=(self.nnodes, self.nnodes),
        ).tocsr()
        pattern.sort_indices()
        self.nnz = pattern.nnz
        self.csr_indptr = pattern.indptr.copy()
        self.csr_indices = pattern.indices.copy()
        row_of = np.repeat(
            np.arange(self.nnodes), np.diff(pattern.indptr)
        )
        keys_sorted = row_of.astype(np.int64) * self.nnodes + pattern.indices
        keys = rows.astype(np.int64) * self.nnodes + cols
        self.scatter_pos = np.searchsorted(keys_sorted, keys)

        # reduced numbering: surface row j=ny is eliminated (Dirichlet)
        nx, ny = self.nx, self.ny
        self.gamma_ids = np.arange(nx + 1) * (ny + 1) + ny
        jj = np.arange(self.nnodes) % (ny + 1)
        ii = np.arange(self.nnodes) // (ny + 1)
        self.free_mask = jj < ny
        self.free_ids = np.nonzero(self.free_mask)[0]
        self.nfree = self.free_ids.size
        free_pos = np.full(self.nnodes, -1, dtype=np.int64)
        free_pos[self.free_ids] = ii[self.free_ids] * ny + jj[self.free_ids]
        gamma_pos = np.full(self.nnodes, -1, dtype=np.int64)
        gamma_pos[self.gamma_ids] = np.arange(nx + 1)

        er = np.repeat(np.arange(self.nnodes), np.diff(self.csr_indptr))
        ec = self.csr_indices
        fr = free_pos[er]
        fc = free_pos[ec]
        both_free = (fr >= 0) & (fc >= 0)
        upper = both_free & (fr <= fc)
        self.bandwidth = ny + 1
        u = self.bandwidth
        sel = np.nonzero(upper)[0]
        self.band_src = sel
        self.band_dst = (u + fr[sel] - fc[sel]) * self.nfree + fc[sel]

        ig_sel = np.nonzero((fr >= 0) & (gamma_pos[ec] >= 0))[0]
        order = np.lexsort((gamma_pos[ec[ig_sel]], fr[ig_sel]))
        ig_sel = ig_sel[order]
        self.aig_src = ig_sel
        self.aig_csr = sp.csr_matrix(
            (
                np.zeros(ig_sel.size),
                (fr[ig_sel], gamma_pos[ec[ig_sel]]),
            ),
            shape=(self.nfree, nx + 1),
        )
        self.aig_csr.sort_indices()

    def _build_boundary(self) -> None:
        nx, ny = self.nx, self.ny
        self.corner_ids = np.array(
            [self.node_id(0, ny), self.node_id(nx, ny)]
        )
        self.side_nodes = {
            "bottom": np.array([self.node_id(i, 0) for i in range(nx + 1)]),
            "left": np.array([self.node_id(0, j) for j in range(ny + 1)]),
            "right": np.array([self.node_id(nx, j) for j in range(ny + 1)]),
        }
        self.side_edges = {}
        self.side_half_len = {}
        for side, ids in self.side_nodes.items():
            en = np.column_stack([ids[:-1], ids[1:]])
            seg = self.coords[en[:, 1]] - self.coords[en[:, 0]]
            self.side_edges[side] = en
            self.side_half_len[side] = 0.5 * np.hypot(seg[:, 0], seg[:, 1])
        self.edge_shape = np.column_stack(
            [0.5 * (1 - _EDGE_QP), 0.5 * (1 + _EDGE_QP)]
        )

        dxs = np.diff(self.x)
        W = np.zeros(nx + 1)
        W[:-1] += 0.5 * dxs
        W[1:] += 0.5 * dxs
        self.gamma_weights = W
        main = np.zeros(nx + 1)
        main[:-1] += dxs / 3.0
        main[1:] += dxs / 3.0
        self.gamma_mass = sp.diags(
            [dxs / 6.0, main, dxs / 6.0], [-1, 0, 1], format="csr"
        )

    def node_grid(self, field: FloatArray) -> FloatArray:
        return np.asarray(field).reshape(self.nx + 1, self.ny + 1)


def build_mesh(
    vessel, hs: FloatArray, ny: int, hs_slope: FloatArray | None = None
) -> Mesh:
    """Mesh the layer between the vessel bottom and a given surface."""
    x = vessel.x
    if hs_slope is None:
        hs_slope = d1(np.asarray(hs, dtype=float), x[1] - x[0])
    return Mesh(x, vessel.hw, np.asarray(hs, dtype=float), hs_slope, ny)


def mesh_from_state(state, ny: int) -> Mesh:
    return Mesh(state.x, state.vessel.hw, state.hs, state.hs_slope, ny)


def assemble_data(mesh: Mesh, c00, c01, c11) -> FloatArray:
    """Stiffness values for the bilinear form with matrix field [[c00,c01],[c01,c11]].

    Returns the CSR data array matching the mesh's fixed sparsity.
    """
    conn = mesh.conn
    kloc = kernels.local_stiffness(
        mesh.SH,
        mesh.GX,
        mesh.GY,
        mesh.WQ,
        np.ascontiguousarray(np.asarray(c00).ravel()[conn]),
        np.ascontiguousarray(np.asarray(c01).ravel()[conn]),
        np.ascontiguousarray(np.asarray(c11).ravel()[conn]),
    )
    return np.bincount(
        mesh.scatter_pos, weights=kloc.ravel(), minlength=mesh.nnz
    )


@dataclass(frozen=True)
class DNMatrix:
    """Dense surface operator: Dirichlet nodal data to conormal flux density."""

    mat: FloatArray
    weights: FloatArray
    coeff_token: int

    def apply(self, d: FloatArray) -> FloatArray:
        return self.mat @ d


class Operator:
    """One coefficient snapshot: assembled forms plus a banded factorization."""

    def __init__(self, mesh: Mesh, coeffs) -> None:
        self.mesh = mesh
        self.coeff_token = getattr(coeffs, "token", -1)
        self.detj = np.asarray(coeffs.detj).ravel()
        self.kdata = assemble_data(mesh, coeffs.a00, coeffs.a01, coeffs.a11)
        self.K = sp.csr_matrix(
            (self.kdata, mesh.csr_indices, mesh.csr_indptr),
            shape=(mesh.nnodes, mesh.nnodes),
        )
        u = mesh.bandwidth
        ab = np.zeros((u + 1, mesh.nfree))
        ab.ravel()[mesh.band_dst] = self.kdata[mesh.band_src]
        try:
            self.cb = sla.cholesky_banded(ab, lower=False, check_finite=False)
        except sla.LinAlgError as exc:
            raise SolveError("interior stiffness not positive definite") from exc
        self.aig = mesh.aig_csr.copy()
        self.aig.data = self.kdata[mesh.aig_src]
        self._bordered = None

    # -- loads ---------------------------------------------------------

    def load_vector(
        self,
        f: FloatArray | None = None,
        g1: FloatArray | None = None,
        g2: dict | None = None,
        g2_has_jacobian: bool = False,
    ) -> FloatArray:
        """Assemble the right side: volume source, surface and wall fluxes.

        The wall datum is a dict with optional keys bottom/left/right, each
        an array of nodal values along that side; it is multiplied by detJ
        unless the caller already folded it in.  The surface datum pairs in
        the horizontal measure.
        """
        mesh = self.mesh
        b = np.zeros(mesh.nnodes)
        if f is not None:
            fl = np.asarray(f).ravel()
            fq = np.einsum("cqa,ca->cq", mesh.SH, fl[mesh.conn])
            np.add.at(
                b,
                mesh.conn.ravel(),
                -np.einsum("cq,cq,cqa->ca", mesh.WQ, fq, mesh.SH).ravel(),
            )
        if g1 is not None:
            b[mesh.gamma_ids] += mesh.gamma_mass @ np.asarray(g1)
        if g2:
            for side, vals in g2.items():
                ids = mesh.side_nodes[side]
                gl = np.asarray(vals, dtype=float)
                if gl.shape != ids.shape:
                    raise ValueError(f"{side} wall data have the wrong length")
                if not g2_has_jacobian:
                    gl = gl * self.detj[ids]
                gq = gl[:-1, None] * mesh.edge_shape[:, 0] + gl[1:, None] * mesh.edge_shape[:, 1]
                contrib = (
                    mesh.side_half_len[side][:, None, None]
                    * gq[:, :, None]
                    * mesh.edge_shape[None, :, :]
                ).sum(axis=1)
                np.add.at(b, mesh.side_edges[side].ravel(), contrib.ravel())
        return b

    # -- solves --------------------------------------------------------

    def solve_dirichlet(
        self, d: FloatArray, b: FloatArray | None = None
    ) -> FloatArray:
        mesh = self.mesh
        rhs = -(self.aig @ np.asarray(d))
        if b is not None:
            rhs = rhs + b[mesh.free_ids]
        phi = np.empty(mesh.nnodes)
        phi[mesh.free_ids] = sla.cho_solve_banded(
            (self.cb, False), rhs, check_finite=False
        )
        phi[mesh.gamma_ids] = d
        return phi

    def weak_flux(self, phi: FloatArray, b: FloatArray | None = None) -> FloatArray:
        """Residual functional on surface test functions (not yet a density)."""
        r = self.K @ phi
        if b is not None:
            r = r - b
        return r[self.mesh.gamma_ids]

    def flux_density(self, q: FloatArray) -> FloatArray:
        return q / self.mesh.gamma_weights

    def dn_matrix(self) -> DNMatrix:
        mesh = self.mesh
        B = self.aig.toarray()
        X = sla.cho_solve_banded((self.cb, False), -B, check_finite=False)
        phis = np.zeros((mesh.nnodes, mesh.nx + 1))
        phis[mesh.free_ids] = X
        phis[mesh.gamma_ids] = np.eye(mesh.nx + 1)
        q = (self.K @ phis)[mesh.gamma_ids]
        return DNMatrix(
            mat=q / mesh.gamma_weights[:, None],
            weights=mesh.gamma_weights.copy(),
            coeff_token=self.coeff_token,
        )

    def solve_neumann(
        self,
        g1: FloatArray | None = None,
        g2: FloatArray | None = None,
        f: FloatArray | None = None,
        g2_has_jacobian: bool = False,
    ) -> tuple[FloatArray, float]:
        """Pure Neumann solve in the zero-mean gauge.

        Returns the solution and the compatibility defect of the supplied
        data.  Small defects are projected out of the load (and reported);
        defects above 1e-6 are rejected as inconsistent.
        """
        mesh = self.mesh
        b = self.load_vector(f=f, g1=g1, g2=g2, g2_has_jacobian=g2_has_jacobian)
        defect = float(b.sum())
        if abs(defect) > 1e-6:
            raise CompatibilityError(
                f"Neumann data defect {defect:.3e} exceeds 1e-6"
            )
        b = b - defect * mesh.lumped_area / mesh.area
        if self._bordered is None:
            m = sp.csr_matrix(
                (mesh.lumped_area, (np.arange(mesh.nnodes), np.zeros(mesh.nnodes, dtype=int))),
                shape=(mesh.nnodes, 1),
            )
            big = sp.bmat([[self.K, m], [m.T, None]], format="csc")
            try:
                self._bordered = spla.splu(big)
            except RuntimeError as exc:
                raise SolveError("singular bordered Neumann system") from exc
        sol = self._bordered.solve(np.append(b, 0.0))
        return sol[:-1], defect

    def energy(self, phi: FloatArray, psi: FloatArray | None = None) -> float:
        """Consistent dissipation form: the assembled bilinear form itself."""
        other = phi if psi is None else psi
        return float(phi @ (self.K @ other))


# -- module-level conveniences ----------------------------------------


def solve_mixed(
    coeffs,
    mesh: Mesh,
    dirichlet: FloatArray,
    f: FloatArray | None = None,
    wall: FloatArray | None = None,
) -> FloatArray:
    op = Operator(mesh, coeffs)
    b = op.load_vector(f=f, g2=wall) if (f is not None or wall is not None) else None
    return op.solve_dirichlet(dirichlet, b)


def solve_neumann(
    coeffs,
    mesh: Mesh,
    g1: FloatArray | None = None,
    g2: FloatArray | None = None,
    f: FloatArray | None = None,
):
    return Operator(mesh, coeffs).solve_neumann(g1=g1, g2=g2, f=f)


def dn_apply(coeffs, mesh: Mesh, dirichlet: FloatArray) -> FloatArray:
    op = Operator(mesh, coeffs)
    phi = op.solve_dirichlet(dirichlet)
    return op.flux_density(op.weak_flux(phi))


def dn_assemble(coeffs, mesh: Mesh) -> DNMatrix:
    return Operator(mesh, coeffs).dn_matrix()


def green_residual(op: Operator, phi: FloatArray, b: FloatArray | None = None) -> float:
    """Relative defect of the discrete Green identity for a mixed solve."""
    lhs = op.energy(phi)
    if b is not None:
        lhs -= float(phi @ b)
    q = op.weak_flux(phi, b)
    rhs = float(q @ phi[op.mesh.gamma_ids])
    scale = abs(lhs) + abs(rhs) + 1e-300
    return abs(lhs - rhs) / scale


# -- quadrature helpers used by diagnostics ---------------------------


def qp_interp(mesh: Mesh, nodal) -> FloatArray:
    vals = np.asarray(nodal).ravel()[mesh.conn]
    return np.einsum("cqa,ca->cq", mesh.SH, vals)


def qp_gradient(mesh: Mesh, nodal) -> tuple[FloatArray, FloatArray]:
    vals = np.asarray(nodal).ravel()[mesh.conn]
    gx = np.einsum("cqa,ca->cq", mesh.GX, vals)
    gy = np.einsum("cqa,ca->cq", mesh.GY, vals)
    return gx, gy


def integrate_cells(mesh: Mesh, qp_values: FloatArray) -> float:
    return float(np.sum(mesh.WQ * qp_values))
