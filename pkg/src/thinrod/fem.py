"""
Finite element assembly.

3D: trilinear hexes with 2x2x2 Gauss quadrature for the rescaled form

    int_G  dU/dy1 dV/dy1 + eps^-2 (dU/dy2 dV/dy2 + dU/dy3 dV/dy3)  dy

assembled as K(eps) = A + eps^-2 B, and the consistent mass matrix.
1D: P1 elements for the weighted forms int w u'v' and int w u v.

Matrices are ``scipy.sparse.csr_matrix`` holding the full symmetric pattern.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .geometry import CrossSectionProfile, _area_unchecked
from .mesh3d import HexMesh, MeshError, Tag, gauss_points, hex_jacobians, longitudinal_grid


class BC(str, Enum):
    MIXED = "mixed"
    NEUMANN = "neumann"

    @classmethod
    def parse(cls, value) -> "BC":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        if v in ("mixed", "dirichlet"):
            return cls.MIXED
        if v == "neumann":
            return cls.NEUMANN
        raise ValueError(f"unknown boundary condition {value!r}")


class EmptyProblemError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DofMap:
    """Partition of the nodes into constrained (Dirichlet) and free dofs."""

    n_total: int
    constrained: np.ndarray
    free: np.ndarray
    coords: np.ndarray | None = None

    @classmethod
    def from_constrained(cls, n_total: int, constrained, coords=None) -> "DofMap":
        constrained = np.unique(np.asarray(constrained, dtype=int))
        free = np.setdiff1d(np.arange(n_total), constrained)
        return cls(n_total, constrained, free, coords)

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Embed free-dof vectors (n_free,) or (n_free, k) into full numbering, zeros elsewhere."""
        u_free = np.asarray(u_free)
        out = np.zeros((self.n_total,) + u_free.shape[1:])
        out[self.free] = u_free
        return out


def dofmap_3d(mesh: HexMesh, bc) -> DofMap:
    bc = BC.parse(bc)
    fixed = mesh.tagged_nodes(Tag.GAMMA0, Tag.GAMMA1) if bc is BC.MIXED else []
    return DofMap.from_constrained(mesh.n_nodes, fixed)


def _to_csr(mesh: HexMesh, Ke: np.ndarray) -> sp.csr_matrix:
    n = mesh.n_nodes
    rows = np.repeat(mesh.hexes, 8, axis=1).ravel()
    cols = np.tile(mesh.hexes, (1, 8)).ravel()
    A = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return ((A + A.T) * 0.5).tocsr()


def _gradients(mesh: HexMesh):
    J, det, ref = hex_jacobians(mesh)
    if np.any(det <= 0):
        raise MeshError("non-positive Jacobian at a quadrature point")
    dN = np.stack([r[1] for r in ref])                        # (q, 8, 3)
    Jinv = np.linalg.inv(J)                                   # (E, q, 3, 3)
    G = np.einsum("qnr,eqrx->eqnx", dN, Jinv)                 # (E, q, 8, 3)
    return G, det


def assemble_split(mesh: HexMesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Longitudinal part A and transverse part B with K(eps) = A + eps^-2 B."""
    G, det = _gradients(mesh)
    wdet = 0.125 * det
    Ae = np.einsum("eq,eqn,eqm->enm", wdet, G[..., 0], G[..., 0])
    Be = np.einsum("eq,eqnx,eqmx->enm", wdet, G[..., 1:], G[..., 1:])
    return _to_csr(mesh, Ae), _to_csr(mesh, Be)


def stiffness_from_split(A: sp.csr_matrix, B: sp.csr_matrix, epsilon: float) -> sp.csr_matrix:
    _check_eps(epsilon)
    return (A + B * (1.0 / epsilon**2)).tocsr()


def _check_eps(epsilon: float):
    # eps = 1 (isotropic Laplacian) is accepted here for element checks
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")


def assemble_stiffness_aniso(mesh: HexMesh, epsilon: float) -> sp.csr_matrix:
    _check_eps(epsilon)
    A, B = assemble_split(mesh)
    return stiffness_from_split(A, B, epsilon)


def assemble_mass(mesh: HexMesh) -> sp.csr_matrix:
    _, det, ref = hex_jacobians(mesh)
    if np.any(det <= 0):
        raise MeshError("non-positive Jacobian at a quadrature point")
    N = np.stack([r[0] for r in ref])                         # (q, 8)
    Me = np.einsum("eq,qn,qm->enm", 0.125 * det, N, N)
    return _to_csr(mesh, Me)


def apply_dirichlet(K: sp.spmatrix, M: sp.spmatrix, dofs: DofMap):
    """Free-free blocks of K and M (row/column elimination of constrained dofs)."""
    if len(dofs.free) == 0:
        raise EmptyProblemError("every dof is constrained")
    if len(dofs.constrained) == 0:
        return K, M
    f = dofs.free
    return K[f][:, f].tocsr(), M[f][:, f].tocsr()


# 3-point Gauss-Legendre on [0, 1]: exact for degree 5
_G3X = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_G3W = np.array([5.0, 8.0, 5.0]) / 18.0


def assemble_1d_grid(grid: np.ndarray, weight: Callable[[np.ndarray], np.ndarray]):
    """P1 weighted stiffness and mass on an explicit grid.

    ``weight`` is evaluated only at interior Gauss points of each cell, so any
    jump of the weight must sit on a grid node.
    """
    grid = np.asarray(grid, dtype=float)
    h = np.diff(grid)
    xq = grid[:-1, None] + h[:, None] * _G3X[None]            # (C, 3)
    wq = weight(xq) * _G3W[None] * h[:, None]
    phi0, phi1 = 1.0 - _G3X, _G3X
    m00 = wq @ (phi0 * phi0)
    m01 = wq @ (phi0 * phi1)
    m11 = wq @ (phi1 * phi1)
    k = wq.sum(axis=1) / h**2
    n = len(grid)
    i = np.arange(n - 1)
    rows = np.concatenate([i, i, i + 1, i + 1])
    cols = np.concatenate([i, i + 1, i, i + 1])
    K = sp.coo_matrix((np.concatenate([k, -k, -k, k]), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((np.concatenate([m00, m01, m01, m11]), (rows, cols)), shape=(n, n)).tocsr()
    return K, M


def assemble_1d(profile: CrossSectionProfile, n_cells: int, bc, weight=None):
    """Weighted P1 matrices of the limit problem and the end-node dof map.

    The grid is :func:`longitudinal_grid`, so breakpoints are cell boundaries.
    ``weight`` defaults to the section area.
    """
    bc = BC.parse(bc)
    grid = longitudinal_grid(profile, n_cells)
    if weight is None:
        def weight(x):
            return _area_unchecked(profile, x)
    K, M = assemble_1d_grid(grid, weight)
    fixed = [0, len(grid) - 1] if bc is BC.MIXED else []
    return K, M, DofMap.from_constrained(len(grid), fixed, coords=grid)


def write_coo(A: sp.spmatrix, path) -> None:
    """Coordinate text dump: one ``row col value`` line per stored entry."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with open(path, "w") as fh:
        fh.write(f"# {C.shape[0]} {C.shape[1]} {C.nnz}\n")
        for r, c, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
