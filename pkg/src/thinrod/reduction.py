"""
Transfer between the rod and the limit interval.

``extend`` is the section-constant extension (f(y1) copied over each
section), ``section_average`` its left inverse, and the distances compare
3D fields with extended limit modes in L2(G), i.e. through the assembled 3D
mass matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .eigensolve import sign_normalize
from .fem import assemble_mass
from .limit1d import Mode1D
from .mesh3d import HexMesh


class ReductionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Field3D:
    values: np.ndarray
    mesh: HexMesh

    def __post_init__(self):
        if len(self.values) != self.mesh.n_nodes:
            raise ReductionError(f"field has {len(self.values)} values for {self.mesh.n_nodes} nodes")


def _layer_values(f: Mode1D, mesh: HexMesh) -> np.ndarray:
    layers = mesh.layers
    if len(f.grid) == len(layers) and np.allclose(f.grid, layers, rtol=0, atol=1e-13):
        return np.asarray(f.values, dtype=float)
    tol = 1e-12 * (layers[-1] - layers[0])
    if layers[0] < f.grid[0] - tol or layers[-1] > f.grid[-1] + tol:
        raise ReductionError("mode grid does not cover the mesh stations")
    return np.interp(layers, f.grid, f.values)


def extend(f: Mode1D, mesh: HexMesh) -> Field3D:
    return Field3D(_layer_values(f, mesh)[mesh.node_layer], mesh)


def extension_matrix(mesh: HexMesh) -> sp.csr_matrix:
    """Sparse E with extend(f).values = E @ f for f given at the stations."""
    n = mesh.n_nodes
    return sp.csr_matrix((np.ones(n), (np.arange(n), mesh.node_layer)),
                         shape=(n, len(mesh.layers)))


def section_average(u: Field3D) -> Mode1D:
    """Per-station mean of ``u`` over the section (right-limit section at jumps)."""
    vals = np.array([w @ u.values[ids] / w.sum() for ids, w in u.mesh.layer_sections])
    return Mode1D(u.mesh.layers.copy(), vals)


def align_sign(u: Field3D) -> Field3D:
    """Sign convention: first significant section-average value positive."""
    avg = section_average(u).values
    probe = avg if np.abs(avg).max() > 1e-8 * np.abs(u.values).max() else u.values
    return Field3D(sign_normalize(u.values, probe=probe), u.mesh)


def _mass(mesh, mass):
    return assemble_mass(mesh) if mass is None else mass


def l2_norm(u: Field3D, mass=None) -> float:
    M = _mass(u.mesh, mass)
    return float(np.sqrt(u.values @ (M @ u.values)))


def mode_distance(u: Field3D, f: Mode1D, mass=None) -> float:
    """min over s in {+1, -1} of ||u - s extend(f)||_{L2(G)}."""
    M = _mass(u.mesh, mass)
    fe = extend(f, u.mesh).values
    uu, ff, uf = u.values @ (M @ u.values), fe @ (M @ fe), u.values @ (M @ fe)
    return float(np.sqrt(max(uu + ff - 2.0 * abs(uf), 0.0)))


def subspace_distance(us, f: Mode1D, mass=None, orth_tol: float = 1e-8) -> float:
    """Distance in L2(G) from extend(f) to the span of the M-orthonormal fields ``us``.

    This is the error of the best linear combination of ``us``.
    """
    us = [us] if isinstance(us, Field3D) else list(us)
    if not us:
        raise ReductionError("need at least one field")
    mesh = us[0].mesh
    U = np.column_stack([u.values for u in us])
    M = _mass(mesh, mass)
    MU = M @ U
    if np.abs(U.T @ MU - np.eye(U.shape[1])).max() > orth_tol:
        raise ReductionError("fields are not M-orthonormal")
    fe = extend(f, mesh).values
    r = fe - U @ (MU.T @ fe)
    return float(np.sqrt(max(r @ (M @ r), 0.0)))
