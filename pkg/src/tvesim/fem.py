"""Trilinear (Q1) finite elements on a uniform axis-aligned box.

All cells are congruent, so reference shape data are computed once and the
global operators are sparse matrices mapping nodal vectors to quadrature-point
values.  Quadrature is 2x2x2 Gauss per cell and 2x2 Gauss per boundary face.

Node, cell and quadrature-point numbering is lexicographic with the first axis
fastest.  Displacement dofs are ``3 * node + component``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .tensor import SQRT2, ElasticityTensor

GAUSS_1D = np.array([-1.0, 1.0]) / np.sqrt(3.0)
# local corner / quadrature ordering: a + 2b + 4c
_CORNERS = np.array([(a, b, c) for c in (0, 1) for b in (0, 1) for a in (0, 1)])


class SingularMatrixError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoxMesh:
    extents: tuple[float, float, float] = (1.0, 1.0, 1.0)
    cells: tuple[int, int, int] = (4, 4, 4)

    def __post_init__(self):
        ext = tuple(float(e) for e in self.extents)
        cells = tuple(int(n) for n in self.cells)
        if len(ext) != 3 or len(cells) != 3:
            raise ValueError("a box mesh needs three extents and three cell counts")
        if min(cells) < 2:
            raise ValueError(f"need at least 2 cells per axis, got {cells}")
        if min(ext) <= 0:
            raise ValueError("box extents must be positive")
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def cube(cls, n: int, length: float = 1.0) -> BoxMesh:
        return cls((length,) * 3, (n,) * 3)

    @property
    def spacing(self) -> np.ndarray:
        return np.array(self.extents) / np.array(self.cells)

    @property
    def node_shape(self) -> tuple[int, int, int]:
        return tuple(n + 1 for n in self.cells)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.node_shape))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def surface_area(self) -> float:
        a, b, c = self.extents
        return 2.0 * (a * b + b * c + a * c)

    @cached_property
    def nodes(self) -> np.ndarray:
        axes = [np.linspace(0.0, L, n + 1) for L, n in zip(self.extents, self.cells)]
        z, y, x = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
        return np.column_stack([x.ravel(), y.ravel(), z.ravel()])

    def node_index(self, i, j, k):
        nx, ny, _ = self.node_shape
        return i + nx * (j + ny * k)

    @cached_property
    def cell_nodes(self) -> np.ndarray:
        """``(n_cells, 8)`` node ids in local corner order."""
        n1, n2, n3 = self.cells
        k, j, i = np.meshgrid(np.arange(n3), np.arange(n2), np.arange(n1), indexing="ij")
        i, j, k = i.ravel(), j.ravel(), k.ravel()
        return np.column_stack([self.node_index(i + a, j + b, k + c) for a, b, c in _CORNERS])

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        x = self.nodes
        tol = 1e-12 * max(self.extents)
        on = np.zeros(len(x), dtype=bool)
        for d, L in enumerate(self.extents):
            on |= (np.abs(x[:, d]) < tol) | (np.abs(x[:, d] - L) < tol)
        return on

    @cached_property
    def faces(self) -> tuple[np.ndarray, np.ndarray]:
        """Boundary quadrilaterals as ``(face_nodes (nf, 4), side_tag (nf,))``.

        Sides are tagged 0..5 for x-, x+, y-, y+, z-, z+; every boundary face
        carries exactly one tag.
        """
        nx, ny, nz = self.node_shape
        quads, tags = [], []
        for d in range(3):
            a, b = [e for e in range(3) if e != d]
            for side, fixed in ((0, 0), (1, self.node_shape[d] - 1)):
                for ib in range(self.node_shape[b] - 1):
                    for ia in range(self.node_shape[a] - 1):
                        quad = []
                        for db, da in ((0, 0), (0, 1), (1, 0), (1, 1)):
                            idx = [0, 0, 0]
                            idx[d], idx[a], idx[b] = fixed, ia + da, ib + db
                            quad.append(self.node_index(*idx))
                        quads.append(quad)
                        tags.append(2 * d + side)
        return np.array(quads), np.array(tags)

    def hash(self) -> bytes:
        """32-byte digest identifying the mesh geometry."""
        text = "box:" + ",".join(f"{e:.17g}" for e in self.extents) + ":" + ",".join(map(str, self.cells))
        return hashlib.sha256(text.encode()).digest()


def _reference_cell(h):
    """Shape values ``(8 qp, 8 nodes)`` and physical gradients ``(8, 8, 3)``."""
    h = np.asarray(h, dtype=float)
    qp = GAUSS_1D[_CORNERS]  # (8, 3) in [-1, 1]^3, same ordering as corners
    sign = 2.0 * _CORNERS - 1.0  # (8, 3)
    fac = 1.0 + qp[:, None, :] * sign[None, :, :]  # (q, n, 3)
    vals = np.prod(fac, axis=2) / 8.0
    grads = np.empty((8, 8, 3))
    for d in range(3):
        others = [e for e in range(3) if e != d]
        grads[:, :, d] = sign[None, :, d] * np.prod(fac[:, :, others], axis=2) / 8.0 * (2.0 / h[d])
    return qp, vals, grads


@dataclass(frozen=True)
class QPTensorField:
    """One Mandel tensor per quadrature point plus the matching weights."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.weights), 6):
            raise ValueError(f"field shape {self.values.shape} does not match {len(self.weights)} quadrature points")


@dataclass
class FEAssembly:
    mesh: BoxMesh
    D: ElasticityTensor
    qp_coords: np.ndarray
    weights: np.ndarray
    N: sp.csr_matrix  # (nq, nnodes)
    grad: tuple  # 3 x (nq, nnodes)
    B_full: sp.csr_matrix  # (6 nq, 3 nnodes) Mandel strain
    free_dofs: np.ndarray
    fixed_dofs: np.ndarray
    M_theta: sp.csr_matrix
    K_theta: sp.csr_matrix
    M_u: sp.csr_matrix
    K_u: sp.csr_matrix
    K_u_full: sp.csr_matrix
    face_N: sp.csr_matrix  # (nbq, nnodes)
    face_weights: np.ndarray
    face_coords: np.ndarray
    face_tags: np.ndarray
    face_normals: np.ndarray
    extras: dict = field(default_factory=dict)

    @property
    def n_qp(self) -> int:
        return len(self.weights)

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    @property
    def n_free(self) -> int:
        return len(self.free_dofs)

    @cached_property
    def B(self) -> sp.csr_matrix:
        """Strain operator restricted to free (interior) displacement dofs."""
        return self.B_full[:, self.free_dofs].tocsr()

    @cached_property
    def div_full(self) -> sp.csr_matrix:
        """``(nq, 3 nnodes)`` divergence at quadrature points."""
        blocks = []
        nn = self.n_nodes
        for d in range(3):
            sel = sp.csr_matrix((np.ones(nn), (np.arange(nn), 3 * np.arange(nn) + d)), shape=(nn, 3 * nn))
            blocks.append(self.grad[d] @ sel)
        return (blocks[0] + blocks[1] + blocks[2]).tocsr()

    @cached_property
    def div(self) -> sp.csr_matrix:
        return self.div_full[:, self.free_dofs].tocsr()

    @cached_property
    def N_vec(self) -> sp.csr_matrix:
        """``(3 nq, 3 nnodes)`` vector shape values, rows ``3 q + component``."""
        return sp.kron(self.N, sp.identity(3), format="csr")

    def expand(self, u_free):
        """Free-dof vector -> full nodal vector with zero boundary values."""
        out = np.zeros(3 * self.n_nodes)
        out[self.free_dofs] = u_free
        return out

    def interpolate(self, func, t=None):
        """Nodal interpolant of ``func(x)`` or ``func(x, t)`` (scalar or vector)."""
        x = self.mesh.nodes
        vals = np.asarray(func(x) if t is None else func(x, t), dtype=float)
        return vals.reshape(-1) if vals.ndim > 1 else np.broadcast_to(vals, (len(x),)).copy()

    def at_qp(self, func, t=None):
        x = self.qp_coords
        return np.asarray(func(x) if t is None else func(x, t), dtype=float)


def _check_spd(mat, name):
    lu = spla.splu(sp.csc_matrix(mat), permc_spec="NATURAL", diag_pivot_thresh=0.0)
    diag = lu.U.diagonal()
    if np.any(diag <= 0.0) or not np.all(np.isfinite(diag)):
        raise SingularMatrixError(f"{name} is singular or indefinite")


def assemble(mesh: BoxMesh, D: ElasticityTensor) -> FEAssembly:
    if not D.is_positive_definite:
        raise ValueError("elasticity operator must be positive definite")
    h = mesh.spacing
    ref_qp, vals, grads = _reference_cell(h)
    ncell = mesh.n_cells
    nn = mesh.n_nodes
    conn = mesh.cell_nodes  # (ncell, 8)

    # cell origins -> quadrature coordinates
    origin = mesh.nodes[conn[:, 0]]
    local = (ref_qp + 1.0) * 0.5 * h  # (8, 3)
    qp_coords = (origin[:, None, :] + local[None, :, :]).reshape(-1, 3)
    nq = ncell * 8
    weights = np.full(nq, np.prod(h) / 8.0)

    rows = np.repeat(np.arange(nq), 8)
    cols = np.repeat(conn, 8, axis=0).reshape(-1)  # each qp row lists its cell's 8 nodes
    N = sp.csr_matrix((np.tile(vals, (ncell, 1)).ravel(), (rows, cols)), shape=(nq, nn))
    grad = tuple(
        sp.csr_matrix((np.tile(grads[:, :, d], (ncell, 1)).ravel(), (rows, cols)), shape=(nq, nn))
        for d in range(3)
    )

    # Mandel strain: rows 6q + slot, cols 3 node + comp
    r_list, c_list, v_list = [], [], []
    gq = [np.tile(grads[:, :, d], (ncell, 1)).ravel() for d in range(3)]
    node = cols
    qrow = rows
    for slot, (i, j) in enumerate(((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))):
        if i == j:
            r_list.append(6 * qrow + slot)
            c_list.append(3 * node + i)
            v_list.append(gq[i])
        else:
            # sqrt(2) * 0.5 * (du_i/dx_j + du_j/dx_i)
            r_list += [6 * qrow + slot, 6 * qrow + slot]
            c_list += [3 * node + i, 3 * node + j]
            v_list += [gq[j] / SQRT2, gq[i] / SQRT2]
    B_full = sp.csr_matrix(
        (np.concatenate(v_list), (np.concatenate(r_list), np.concatenate(c_list))),
        shape=(6 * nq, 3 * nn),
    )
    B_full.sum_duplicates()

    bnd = mesh.boundary_nodes
    dof_bnd = np.repeat(bnd, 3)
    free = np.flatnonzero(~dof_bnd)
    fixed = np.flatnonzero(dof_bnd)

    W = sp.diags(weights)
    M_theta = (N.T @ W @ N).tocsr()
    K_theta = sum((g.T @ W @ g for g in grad), sp.csr_matrix((nn, nn))).tocsr()
    WD = sp.kron(W, sp.csr_matrix(D.voigt), format="csr")
    K_u_full = (B_full.T @ WD @ B_full).tocsr()
    K_u = K_u_full[free][:, free].tocsr()
    M_u = sp.kron(M_theta, sp.identity(3), format="csr")[free][:, free].tocsr()

    _check_spd(M_theta, "temperature mass matrix")
    _check_spd(M_u, "displacement mass matrix")

    face_N, face_w, face_x, face_tag, face_n = _face_quadrature(mesh)

    return FEAssembly(
        mesh=mesh, D=D, qp_coords=qp_coords, weights=weights, N=N, grad=grad, B_full=B_full,
        free_dofs=free, fixed_dofs=fixed, M_theta=M_theta, K_theta=K_theta, M_u=M_u, K_u=K_u,
        K_u_full=K_u_full, face_N=face_N, face_weights=face_w, face_coords=face_x,
        face_tags=face_tag, face_normals=face_n,
    )


def _face_quadrature(mesh: BoxMesh):
    quads, tags = mesh.faces
    x = mesh.nodes
    pts = [(a, b) for b in GAUSS_1D for a in GAUSS_1D]
    # local quad order: (0,0), (1,0), (0,1), (1,1) in the face's (a, b) axes
    loc = np.array([(-1, -1), (1, -1), (-1, 1), (1, 1)], dtype=float)
    shape = np.array([[(1 + s * loc[n, 0]) * (1 + t * loc[n, 1]) / 4.0 for n in range(4)] for s, t in pts])
    nf = len(quads)
    p0, p1, p2 = x[quads[:, 0]], x[quads[:, 1]], x[quads[:, 2]]
    area = np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)
    rows = np.repeat(np.arange(4 * nf), 4)
    cols = np.repeat(quads, 4, axis=0).ravel()
    data = np.tile(shape, (nf, 1)).ravel()
    face_N = sp.csr_matrix((data, (rows, cols)), shape=(4 * nf, mesh.n_nodes))
    face_w = np.repeat(area / 4.0, 4)
    face_x = (face_N @ x)
    normals = np.zeros((6, 3))
    for d in range(3):
        normals[2 * d, d], normals[2 * d + 1, d] = -1.0, 1.0
    face_tag = np.repeat(tags, 4)
    return face_N, face_w, face_x, face_tag, normals[face_tag]


def strain_of(assembly: FEAssembly, u, full: bool = False):
    """Symmetric gradient at quadrature points, ``(nq, 6)`` Mandel.

    ``u`` holds free-dof coefficients unless ``full`` is set, in which case it
    is a complete nodal vector (boundary values included).
    """
    u = np.asarray(u, dtype=float)
    op = assembly.B_full if full else assembly.B
    if u.shape[-1] != op.shape[1]:
        raise ValueError(f"expected {op.shape[1]} displacement coefficients, got {u.shape[-1]}")
    if u.ndim == 1:
        return (op @ u).reshape(-1, 6)
    return (op @ u.T).T.reshape(u.shape[0], assembly.n_qp, 6)


def integrate_qp(assembly: FEAssembly, f):
    """Gauss quadrature of a quadrature-point integrand.

    ``f`` may be an array whose first axis runs over quadrature points (scalar
    or tensor valued), a ``QPTensorField`` or a callable of the coordinates.
    """
    if isinstance(f, QPTensorField):
        f = f.values
    if callable(f):
        f = f(assembly.qp_coords)
    f = np.asarray(f, dtype=float)
    if f.ndim == 0:
        return float(f) * assembly.mesh.volume
    if f.shape[0] != assembly.n_qp:
        raise ValueError(f"integrand has {f.shape[0]} rows, expected {assembly.n_qp}")
    return np.tensordot(assembly.weights, f, axes=(0, 0))


def boundary_integral(assembly: FEAssembly, g, v=None):
    """``int_{dOmega} g v dS`` with ``g`` given per face quadrature point,
    per side tag (length-6 sequence), as a scalar, or as a callable of ``x``.
    ``v`` is a nodal scalar field (defaults to 1)."""
    nb = len(assembly.face_weights)
    if callable(g):
        gq = np.asarray(g(assembly.face_coords), dtype=float)
    else:
        g = np.asarray(g, dtype=float)
        if g.ndim == 0:
            gq = np.full(nb, float(g))
        elif g.shape == (6,) and nb != 6:
            gq = g[assembly.face_tags]
        else:
            gq = g
    vq = np.ones(nb) if v is None else assembly.face_N @ np.asarray(v, dtype=float)
    return float(np.dot(assembly.face_weights, gq * vq))


def boundary_load(assembly: FEAssembly, g) -> np.ndarray:
    """Nodal vector ``b_i = int_{dOmega} g phi_i dS``."""
    nb = len(assembly.face_weights)
    gq = np.asarray(g(assembly.face_coords), dtype=float) if callable(g) else np.broadcast_to(np.asarray(g, float), (nb,))
    return assembly.face_N.T @ (assembly.face_weights * gq)
