"""Structured bilinear finite elements on a rectangular hold-all domain.

Uniform mesh of [0, lx] x [0, ly] with nx * ny quadrilateral elements and
(nx+1)*(ny+1) nodes, node (i, j) at (i*lx/nx, j*ly/ny) with flat index
j*(nx+1) + i.  Area integrals use 2x2 Gauss quadrature, boundary integrals
use the trapezoidal rule edge by edge; both are exact for the polynomial
orders that occur here.  Nodal coefficient fields are interpolated
bilinearly inside elements (no element-wise constants), so weighted
operators differentiate cleanly with respect to nodal values.
"""

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import LinearSolveError

EDGE_NAMES = ("bottom", "right", "top", "left")

# 2x2 Gauss points on [-1,1]^2 and bilinear shape functions at them.
_G = 1.0 / np.sqrt(3.0)
_QPTS = np.array([(-_G, -_G), (_G, -_G), (_G, _G), (-_G, _G)])
# local node order: (0,0), (1,0), (1,1), (0,1) of the element rectangle
_CORNERS = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])


def _shape_tables():
    """Values and reference gradients of the 4 bilinear shape functions
    at the 4 Gauss points; arrays of shape (4 nodes, 4 qp)."""
    xi, eta = _QPTS[:, 0], _QPTS[:, 1]
    n = np.empty((4, 4))
    dxi = np.empty((4, 4))
    deta = np.empty((4, 4))
    for a, (xa, ea) in enumerate(_CORNERS):
        n[a] = 0.25 * (1.0 + xa * xi) * (1.0 + ea * eta)
        dxi[a] = 0.25 * xa * (1.0 + ea * eta)
        deta[a] = 0.25 * ea * (1.0 + xa * xi)
    return n, dxi, deta


_N, _DXI, _DETA = _shape_tables()


class Grid:
    """Immutable uniform rectangular mesh with cached unit operators."""

    def __init__(self, nx: int, ny: int, lx: float, ly: float):
        if not (isinstance(nx, (int, np.integer)) and isinstance(ny, (int, np.integer))):
            raise ValueError("nx, ny must be integers")
        if nx < 2 or ny < 2:
            raise ValueError(f"grid needs nx, ny >= 2, got ({nx}, {ny})")
        if not (lx > 0.0 and ly > 0.0):
            raise ValueError(f"grid needs lx, ly > 0, got ({lx}, {ly})")
        self.nx = int(nx)
        self.ny = int(ny)
        self.lx = float(lx)
        self.ly = float(ly)
        self.hx = self.lx / self.nx
        self.hy = self.ly / self.ny
        self.n_nodes = (self.nx + 1) * (self.ny + 1)
        self.n_elements = self.nx * self.ny

    def __repr__(self):
        return f"Grid(nx={self.nx}, ny={self.ny}, lx={self.lx}, ly={self.ly})"

    def node_index(self, i, j):
        return j * (self.nx + 1) + i

    @cached_property
    def node_xy(self):
        """Node coordinates, shape (n_nodes, 2)."""
        x = np.linspace(0.0, self.lx, self.nx + 1)
        y = np.linspace(0.0, self.ly, self.ny + 1)
        xx, yy = np.meshgrid(x, y)  # rows = j, cols = i
        return np.column_stack([xx.ravel(), yy.ravel()])

    @cached_property
    def conn(self):
        """Element connectivity, shape (n_elements, 4), local CCW order."""
        i = np.arange(self.nx)
        j = np.arange(self.ny)
        ii, jj = np.meshgrid(i, j)
        n0 = jj.ravel() * (self.nx + 1) + ii.ravel()
        return np.column_stack([n0, n0 + 1, n0 + self.nx + 2, n0 + self.nx + 1])

    @cached_property
    def boundary_nodes(self):
        """Sorted indices of the 2(nx+ny) nodes on the boundary."""
        idx = []
        for name in EDGE_NAMES:
            idx.append(self.edge_nodes(name))
        return np.unique(np.concatenate(idx))

    def edge_nodes(self, name: str):
        """Node indices along one edge, ordered by arclength."""
        nx, ny = self.nx, self.ny
        if name == "bottom":
            return np.arange(nx + 1)
        if name == "top":
            return ny * (nx + 1) + np.arange(nx + 1)
        if name == "left":
            return np.arange(ny + 1) * (nx + 1)
        if name == "right":
            return np.arange(ny + 1) * (nx + 1) + nx
        raise ValueError(f"unknown edge {name!r}, expected one of {EDGE_NAMES}")

    def edge_length_step(self, name: str) -> float:
        return self.hx if name in ("bottom", "top") else self.hy

    @cached_property
    def _assembly_indices(self):
        rows = np.repeat(self.conn, 4, axis=1).ravel()
        cols = np.tile(self.conn, (1, 4)).ravel()
        return rows, cols

    @cached_property
    def interior_mask(self):
        m = np.ones(self.n_nodes, dtype=bool)
        m[self.boundary_nodes] = False
        return m

    @cached_property
    def mass(self):
        """Unit-weight mass matrix M1."""
        return assemble_weighted_mass(self, np.ones(self.n_nodes))

    @cached_property
    def stiffness(self):
        """Unit-weight stiffness matrix K1."""
        return assemble_weighted_stiffness(self, np.ones(self.n_nodes))

    @cached_property
    def h1_matrix(self):
        return (self.mass + self.stiffness).tocsr()

    @cached_property
    def lumped_mass(self):
        """Row sums of M1, i.e. integral of each hat function."""
        return np.asarray(self.mass.sum(axis=1)).ravel()


def build_grid(nx: int, ny: int, lx: float, ly: float) -> Grid:
    return Grid(nx, ny, lx, ly)


def _check_weight(grid, w):
    w = np.asarray(w, dtype=float)
    if w.shape != (grid.n_nodes,):
        raise ValueError(f"weight shape {w.shape} != ({grid.n_nodes},)")
    if not np.all(np.isfinite(w)):
        raise ValueError("weight field contains non-finite entries")
    return w


def _quad_weights(grid, w):
    """Bilinear interpolation of nodal w to Gauss points, times det(J)."""
    detj = 0.25 * grid.hx * grid.hy
    return (w[grid.conn] @ _N) * detj  # (n_elements, 4 qp)


def assemble_weighted_mass(grid: Grid, w) -> sp.csr_matrix:
    """M[i,j] = integral of w * N_i * N_j over the domain."""
    w = _check_weight(grid, w)
    wq = _quad_weights(grid, w)
    local = np.einsum("eq,aq,bq->eab", wq, _N, _N)
    rows, cols = grid._assembly_indices
    m = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(grid.n_nodes,) * 2)
    return m.tocsr()


def assemble_weighted_stiffness(grid: Grid, w) -> sp.csr_matrix:
    """K[i,j] = integral of w * grad N_i . grad N_j over the domain."""
    w = _check_weight(grid, w)
    wq = _quad_weights(grid, w)
    dndx = _DXI * (2.0 / grid.hx)
    dndy = _DETA * (2.0 / grid.hy)
    local = np.einsum("eq,aq,bq->eab", wq, dndx, dndx)
    local += np.einsum("eq,aq,bq->eab", wq, dndy, dndy)
    rows, cols = grid._assembly_indices
    k = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(grid.n_nodes,) * 2)
    return k.tocsr()


def assemble_graddot_load(grid: Grid, a, b) -> np.ndarray:
    """Load vector L[i] = integral of N_i * (grad a . grad b).

    a, b are nodal fields interpolated bilinearly; the product of their
    gradients is integrated with the same 2x2 rule as the operators.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    detj = 0.25 * grid.hx * grid.hy
    dndx = _DXI * (2.0 / grid.hx)
    dndy = _DETA * (2.0 / grid.hy)
    ae = a[grid.conn]  # (nel, 4)
    be = b[grid.conn]
    dot = (ae @ dndx) * (be @ dndx) + (ae @ dndy) * (be @ dndy)  # (nel, 4 qp)
    contrib = detj * (dot @ _N.T)  # (nel, 4 local nodes)
    return np.bincount(grid.conn.ravel(), weights=contrib.ravel(),
                       minlength=grid.n_nodes)


def assemble_boundary_load(grid: Grid, edge_values: dict) -> np.ndarray:
    """Discretize <g, v> on the boundary with the trapezoidal rule.

    edge_values maps edge names to nodal traces along that edge (ordered as
    Grid.edge_nodes).  Each edge integrates its own trace, so traces may
    disagree at shared corners (sources active on a subset of edges).
    """
    load = np.zeros(grid.n_nodes)
    for name, vals in edge_values.items():
        nodes = grid.edge_nodes(name)
        vals = np.asarray(vals, dtype=float)
        if vals.shape != nodes.shape:
            raise ValueError(f"edge {name!r}: trace shape {vals.shape} != {nodes.shape}")
        h = grid.edge_length_step(name)
        w = np.full(nodes.size, h)
        w[0] = w[-1] = 0.5 * h
        np.add.at(load, nodes, w * vals)
    return load


def solve_spd(a_mat, rhs, tol: float = 1e-10, x0=None, jacobi: bool = False,
              max_iter: int | None = None) -> np.ndarray:
    """Conjugate gradients for a symmetric positive definite sparse matrix.

    Stops when ||rhs - A x|| <= tol * ||rhs||; raises LinearSolveError after
    max_iter (default 10 * n) iterations, which for the operators assembled
    here means an indefinite/singular matrix or bad scaling.
    """
    if not (0.0 < tol <= 1e-4):
        raise ValueError(f"tol must lie in (0, 1e-4], got {tol}")
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.size
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros(n)
    if max_iter is None:
        max_iter = 10 * n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = rhs - a_mat @ x
    if jacobi:
        dinv = 1.0 / a_mat.diagonal()
        z = dinv * r
    else:
        z = r
    d = z.copy()
    rz = r @ z
    for _ in range(max_iter):
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        ad = a_mat @ d
        dad = d @ ad
        if dad <= 0.0:
            raise LinearSolveError("operator is not positive definite")
        alpha = rz / dad
        x += alpha * d
        r -= alpha * ad
        z = dinv * r if jacobi else r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    if np.linalg.norm(r) <= tol * bnorm:
        return x
    raise LinearSolveError(
        f"CG did not reach rel. residual {tol:g} in {max_iter} iterations "
        f"(reached {np.linalg.norm(r) / bnorm:.3e})")


def norm_l2(grid: Grid, z) -> float:
    """Discrete L2 norm sqrt(z' M1 z)."""
    z = np.asarray(z, dtype=float)
    return float(np.sqrt(max(z @ (grid.mass @ z), 0.0)))


def norm_h1(grid: Grid, z) -> float:
    """Discrete H1 norm sqrt(z' (M1 + K1) z)."""
    z = np.asarray(z, dtype=float)
    return float(np.sqrt(max(z @ (grid.h1_matrix @ z), 0.0)))
