"""Single-layer mixed finite element assembly.

Velocity space: lowest-order Raviart-Thomas on triangles, one normal-flux
degree of freedom per edge, normalized so the flux of a basis function
through its own edge (against the global edge normal) is exactly 1.
Elevation space: piecewise constants, one value per cell.

On a triangle with counterclockwise vertices p0, p1, p2 and area A, the basis
function of the edge opposite vertex k is sign * (x - p_k) / (2A), where sign
reconciles the cell-outward and global edge normals.  All integrands are
quadratic polynomials, so the three-point edge-midpoint rule integrates them
exactly; quadrature error never enters any tolerance budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh
from .sparse import CsrMatrix

BC_NATURAL = "natural"
BC_NORMAL_TRACE_ZERO = "normal_trace_zero"


@dataclass(frozen=True)
class ScalarField:
    """Piecewise-constant coefficient: one strictly positive value per cell."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError("cell values must be a 1D array")
        if not np.all(v > 0):
            raise ValueError("coefficient must be strictly positive on every cell")
        object.__setattr__(self, "values", v)

    @staticmethod
    def constant(mesh, value):
        return ScalarField(np.full(mesh.n_cells, float(value)))

    @staticmethod
    def from_callable(mesh, fn):
        """Evaluate fn(x, y) at cell centroids."""
        c = mesh.cell_centroids()
        return ScalarField(np.array([fn(px, py) for px, py in c]))


@dataclass(frozen=True)
class SingleLayerMatrices:
    """All discrete operators of one layer on a fixed mesh.

    Attributes
    ----------
    mass_v : CsrMatrix
        Coefficient-weighted velocity mass matrix, SPD.
    perp_mass_v : CsrMatrix
        Skew-symmetric rotation mass matrix; entry (i, j) pairs the 90-degree
        rotation (-u2, u1) of basis j against basis i.
    mass_w : CsrMatrix
        Diagonal matrix of cell areas.
    div : CsrMatrix
        Cells x edges divergence matrix with entries exactly +-1.
    divdiv : CsrMatrix
        Edge x edge div-div matrix, equal to div^T mass_w^{-1} div.
    constrained : bool
        True when boundary-edge dofs were eliminated (zero normal trace).
    edge_dofs : ndarray
        Global edge index of each retained velocity dof.
    """

    mesh: Mesh = field(repr=False)
    mass_v: CsrMatrix = field(repr=False)
    perp_mass_v: CsrMatrix = field(repr=False)
    mass_w: CsrMatrix = field(repr=False)
    div: CsrMatrix = field(repr=False)
    divdiv: CsrMatrix = field(repr=False)
    constrained: bool
    edge_dofs: np.ndarray = field(repr=False)

    @property
    def n_vdofs(self):
        return self.edge_dofs.shape[0]

    @property
    def n_wdofs(self):
        return self.mesh.n_cells

    @property
    def cell_areas(self):
        return self.mass_w.values


def _dof_map(mesh, bc):
    if bc == BC_NATURAL:
        edge_dofs = np.arange(mesh.n_edges, dtype=np.int64)
    elif bc == BC_NORMAL_TRACE_ZERO:
        keep = ~mesh.is_boundary_edge()
        edge_dofs = np.nonzero(keep)[0].astype(np.int64)
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    dof_of_edge = np.full(mesh.n_edges, -1, dtype=np.int64)
    dof_of_edge[edge_dofs] = np.arange(edge_dofs.shape[0])
    return edge_dofs, dof_of_edge


def _cell_geometry(mesh):
    p = mesh.vertices[mesh.cells]                       # (nc, 3, 2)
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    # quadrature node q is the midpoint of the edge opposite vertex q
    mid = 0.5 * (p[:, [1, 2, 0]] + p[:, [2, 0, 1]])     # (nc, 3, 2)
    return p, area, mid


def _basis_at_midpoints(mesh):
    """psi[c, a, q, :] = value of local basis a at quadrature node q."""
    p, area, mid = _cell_geometry(mesh)
    signs = mesh.cell_edge_signs.astype(np.float64)
    diff = mid[:, None, :, :] - p[:, :, None, :]        # (nc, 3a, 3q, 2)
    psi = signs[:, :, None, None] * diff / (2.0 * area)[:, None, None, None]
    return psi, area


def _scatter(mesh, local, dof_of_edge, n_dofs):
    """Accumulate (nc, 3, 3) cell matrices into a dof x dof CsrMatrix."""
    e = mesh.cell_edge_indices
    rows = np.broadcast_to(dof_of_edge[e][:, :, None], local.shape).ravel()
    cols = np.broadcast_to(dof_of_edge[e][:, None, :], local.shape).ravel()
    keep = (rows >= 0) & (cols >= 0)
    return CsrMatrix.from_coo(n_dofs, n_dofs, rows[keep], cols[keep],
                              local.ravel()[keep])


def assemble_perp_mass(mesh, kappa, bc=BC_NATURAL):
    """Skew-symmetric rotation mass matrix on velocity dofs."""
    edge_dofs, dof_of_edge = _dof_map(mesh, bc)
    psi, area = _basis_at_midpoints(mesh)
    w = kappa.values * area / 3.0
    perp = np.empty_like(psi)                           # (-u2, u1)
    perp[..., 0] = -psi[..., 1]
    perp[..., 1] = psi[..., 0]
    local = np.einsum("c,cbqx,caqx->cab", w, perp, psi)
    return _scatter(mesh, local, dof_of_edge, edge_dofs.shape[0])


def assemble_single_layer(mesh, kappa, bc=BC_NORMAL_TRACE_ZERO):
    """Assemble mass, rotation, divergence and div-div matrices for a layer.

    Parameters
    ----------
    mesh : Mesh
    kappa : ScalarField
        Strictly positive cellwise coefficient weighting the velocity mass
        and rotation matrices (the div-div matrix stays unweighted).
    bc : str
        ``natural`` keeps every edge dof; ``normal_trace_zero`` eliminates
        boundary-edge dofs strongly (impermeable walls).
    """
    if kappa.values.shape[0] != mesh.n_cells:
        raise ValueError("coefficient has wrong number of cells")
    edge_dofs, dof_of_edge = _dof_map(mesh, bc)
    n = edge_dofs.shape[0]

    psi, area = _basis_at_midpoints(mesh)
    w = kappa.values * area / 3.0
    local_mass = np.einsum("c,caqx,cbqx->cab", w, psi, psi)
    mass_v = _scatter(mesh, local_mass, dof_of_edge, n)
    perp_mass_v = assemble_perp_mass(mesh, kappa, bc)

    mass_w = CsrMatrix.from_diagonal(area)

    # divergence theorem with flux normalization: the cell integral of
    # div(psi_e) is the cell-edge sign, exactly
    e = mesh.cell_edge_indices
    s = mesh.cell_edge_signs
    drows = np.repeat(np.arange(mesh.n_cells, dtype=np.int64), 3)
    dcols = dof_of_edge[e].ravel()
    dvals = s.astype(np.float64).ravel()
    dkeep = dcols >= 0
    div = CsrMatrix.from_coo(mesh.n_cells, n, drows[dkeep], dcols[dkeep],
                             dvals[dkeep])

    inv_area = 1.0 / area
    local_e = (s[:, :, None] * s[:, None, :]).astype(np.float64) \
        * inv_area[:, None, None]
    divdiv = _scatter(mesh, local_e, dof_of_edge, n)

    return SingleLayerMatrices(mesh, mass_v, perp_mass_v, mass_w, div, divdiv,
                               bc == BC_NORMAL_TRACE_ZERO, edge_dofs)


def interpolate_rt0(mesh, fn, edge_dofs=None):
    """Edge-flux interpolant of a smooth vector field.

    Uses midpoint flux values, exact for fields with edgewise-linear normal
    component (in particular all constant fields).
    """
    if edge_dofs is None:
        edge_dofs = np.arange(mesh.n_edges, dtype=np.int64)
    lo = mesh.vertices[mesh.edges[edge_dofs, 0]]
    hi = mesh.vertices[mesh.edges[edge_dofs, 1]]
    mid = 0.5 * (lo + hi)
    tang = hi - lo
    normal = np.column_stack([tang[:, 1], -tang[:, 0]])  # length * unit normal
    vals = np.array([fn(px, py) for px, py in mid])
    return np.einsum("ex,ex->e", vals, normal)


def rt0_divergence(matrices, u):
    """Cellwise divergence values of an RT0 coefficient vector."""
    return matrices.div.matvec(u) / matrices.cell_areas
