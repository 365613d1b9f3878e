"""Structured right-triangle meshes of axis-aligned rectangles.

Each grid square is split by the diagonal from its lower-left to upper-right
corner.  Edges carry a global orientation (unit normal fixed by the
lower-to-higher vertex index) so that normal-flux degrees of freedom are
unambiguous across cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Immutable triangulation with oriented edges and cell/edge connectivity.

    Attributes
    ----------
    nx, ny : int
        Cell counts per axis.
    vertices : ndarray, shape (n_vertices, 2)
        Vertex coordinates.
    cells : ndarray, shape (n_cells, 3)
        Vertex indices per cell, consistently counterclockwise.
    edges : ndarray, shape (n_edges, 2)
        Vertex index pairs, each sorted low-to-high.  The global unit normal
        of an edge is the tangent (high minus low vertex) rotated by -90
        degrees.
    cell_edges : ndarray, shape (n_cells, 3, 2)
        Per cell, three ``(edge index, sign)`` pairs; local edge ``k`` is the
        edge opposite local vertex ``k``.  Sign is +1 when the cell's outward
        normal on that edge matches the global edge normal, -1 otherwise.
    boundary_edges : frozenset of int
        Edge indices on the domain boundary.
    h : float
        Mesh size, 1/max(nx, ny) on the unit square (smallest cell leg in
        general).
    """

    nx: int
    ny: int
    vertices: np.ndarray = field(repr=False)
    cells: np.ndarray = field(repr=False)
    edges: np.ndarray = field(repr=False)
    cell_edges: np.ndarray = field(repr=False)
    boundary_edges: frozenset
    h: float

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def cell_edge_indices(self):
        return self.cell_edges[:, :, 0]

    @property
    def cell_edge_signs(self):
        return self.cell_edges[:, :, 1]

    def cell_areas(self):
        """Signed areas (positive for counterclockwise cells)."""
        p = self.vertices[self.cells]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def cell_centroids(self):
        return self.vertices[self.cells].mean(axis=1)

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def is_boundary_edge(self):
        """Boolean mask over edges, True on the boundary."""
        mask = np.zeros(self.n_edges, dtype=bool)
        mask[list(self.boundary_edges)] = True
        return mask


def build_rectangle_mesh(nx, ny, width=1.0, height=1.0):
    """Triangulate [0, width] x [0, height] into 2*nx*ny right triangles."""
    if nx < 1 or ny < 1:
        raise ValueError("cell counts must be at least 1 per axis")
    if width <= 0 or height <= 0:
        raise ValueError("rectangle extents must be positive")

    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys)          # vertex id = j*(nx+1) + i
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    n_cells = 2 * nx * ny
    cells = np.empty((n_cells, 3), dtype=np.int64)
    c = 0
    for j in range(ny):
        for i in range(nx):
            v00 = j * (nx + 1) + i
            v10 = v00 + 1
            v01 = v00 + (nx + 1)
            v11 = v01 + 1
            cells[c] = (v00, v10, v11)    # lower-right triangle, CCW
            cells[c + 1] = (v00, v11, v01)  # upper-left triangle, CCW
            c += 2

    # Discover edges in cell-sweep order.  Local edge k sits opposite local
    # vertex k; traversed counterclockwise it runs vertex (k+1)%3 -> (k+2)%3,
    # so its outward normal matches the global one exactly when that
    # traversal goes from the lower to the higher vertex index.
    edge_of = {}
    cell_edges = np.empty((n_cells, 3, 2), dtype=np.int64)
    for t in range(n_cells):
        v = cells[t]
        for k in range(3):
            p, q = int(v[(k + 1) % 3]), int(v[(k + 2) % 3])
            key = (p, q) if p < q else (q, p)
            e = edge_of.setdefault(key, len(edge_of))
            cell_edges[t, k, 0] = e
            cell_edges[t, k, 1] = 1 if p < q else -1

    edges = np.array(sorted(edge_of, key=edge_of.get), dtype=np.int64)
    incidence = np.bincount(cell_edges[:, :, 0].ravel(), minlength=len(edge_of))
    boundary = frozenset(int(e) for e in np.nonzero(incidence == 1)[0])

    h = min(width / nx, height / ny)
    mesh = Mesh(nx, ny, vertices, cells, edges, cell_edges, boundary, h)
    for arr in (mesh.vertices, mesh.cells, mesh.edges, mesh.cell_edges):
        arr.setflags(write=False)
    return mesh


def build_unit_square_mesh(nx, ny):
    """Structured triangulation of the unit square; h = 1/max(nx, ny)."""
    return build_rectangle_mesh(nx, ny, 1.0, 1.0)
