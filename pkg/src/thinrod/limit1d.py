"""
The one-dimensional limit model

    -(w u')' = lambda w u  on (l0, l1),   w = |D(x1)|,

with Dirichlet or Neumann ends, and its stationary problems.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .eigensolve import DEFAULT_TOL, Spectrum, neumann_shift_solve, sign_normalize, smallest_eigs
from .fem import BC, assemble_1d, assemble_1d_grid
from .geometry import CrossSectionProfile, _area_unchecked


@dataclass(frozen=True, eq=False)
class Mode1D:
    """Nodal samples of a function of y1 on ``grid``."""

    grid: np.ndarray
    values: np.ndarray
    norm: float | None = None      # weighted L2 norm, when known

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)

    @classmethod
    def from_function(cls, func, grid) -> "Mode1D":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.asarray(func(grid), dtype=float) * np.ones_like(grid))


def weighted_mass(profile: CrossSectionProfile, grid) -> sp.csr_matrix:
    return assemble_1d_grid(grid, lambda x: _area_unchecked(profile, x))[1]


def weighted_norm(profile: CrossSectionProfile, f: Mode1D) -> float:
    """sqrt(int w f^2) for the P1 interpolant of ``f`` on its grid."""
    M = weighted_mass(profile, f.grid)
    return float(np.sqrt(f.values @ (M @ f.values)))


def solve_limit_spectrum(profile: CrossSectionProfile, bc, k: int, n_cells: int,
                         tol: float = DEFAULT_TOL, seed: int = 0) -> Spectrum:
    """First ``k`` eigenpairs of the weighted Sturm-Liouville pencil.

    Eigenvectors are returned on the full grid (``meta["grid"]``), normalized
    in the weighted L2 norm and signed so the first significant value is positive.
    """
    bc = BC.parse(bc)
    K, M, dofs = assemble_1d(profile, n_cells, bc)
    if bc is BC.MIXED:
        Kf, Mf = K[dofs.free][:, dofs.free], M[dofs.free][:, dofs.free]
        spec = smallest_eigs(Kf, Mf, k, tol=tol, seed=seed)
    else:
        spec = neumann_shift_solve(K, M, k, tol=tol, seed=seed)
    U = dofs.expand(spec.eigenvectors)
    U = np.column_stack([sign_normalize(U[:, i]) for i in range(U.shape[1])])
    spec.eigenvectors = U
    spec.bc = bc.value
    spec.meta.update(grid=dofs.coords, n_cells=n_cells)
    return spec


def limit_modes(spec: Spectrum) -> list[Mode1D]:
    grid = spec.meta["grid"]
    return [Mode1D(grid, spec.eigenvectors[:, i], 1.0) for i in range(len(spec))]


def solve_stationary_1d(profile: CrossSectionProfile, bc, f: Mode1D) -> Mode1D:
    """Solve the limit stationary problem with right-hand side ``w f`` on ``f.grid``.

    Mixed: int w u'v' = int w f v with u(l0) = u(l1) = 0.
    Neumann: int w u'v' + int w u v = int w f v.
    """
    bc = BC.parse(bc)
    K, M = assemble_1d_grid(f.grid, lambda x: _area_unchecked(profile, x))
    rhs = M @ f.values
    u = np.zeros(len(f.grid))
    if bc is BC.MIXED:
        free = np.arange(1, len(f.grid) - 1)
        A = sp.csc_matrix(K[free][:, free])
        u[free] = spla.spsolve(A, rhs[free])
    else:
        u = spla.spsolve(sp.csc_matrix(K + M), rhs)
    if not np.all(np.isfinite(u)):
        raise ArithmeticError("singular 1D stationary system")
    return Mode1D(f.grid, u, float(np.sqrt(u @ (M @ u))))
