"""
Convergence experiments: eps-sweeps of the rod spectrum against the limit
model, numerical checks of the isometry and stationary-convergence
conditions, cluster detection and report serialization.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .eigensolve import DEFAULT_TOL, neumann_shift_solve, smallest_eigs
from .fem import BC, apply_dirichlet, assemble_mass, assemble_split, dofmap_3d, stiffness_from_split
from .geometry import CrossSectionProfile, Kind
from .limit1d import Mode1D, limit_modes, solve_limit_spectrum, solve_stationary_1d, weighted_mass
from .mesh3d import extrude_mesh
from .reduction import (Field3D, align_sign, extend, extension_matrix, l2_norm, mode_distance,
                        section_average, subspace_distance)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_EPS = (0.4, 0.2, 0.1, 0.05)
ZERO_EIG = 1e-8


@dataclass(frozen=True)
class ResolutionPolicy:
    """Mesh sizes for a sweep; independent of eps in the rescaled formulation.

    ``mode="refine"`` doubles ``n1`` to separate discretization error from
    the eps-dependence.
    """

    n1: int = 128
    n_sec: int = 8
    n_cells: int = 10_000
    mode: str = "fixed"

    def __post_init__(self):
        if self.mode not in ("fixed", "refine"):
            raise ValueError(f"unknown resolution policy {self.mode!r}")

    @property
    def mesh_n1(self) -> int:
        return 2 * self.n1 if self.mode == "refine" else self.n1


def _check_eps_list(eps_list):
    eps = [float(e) for e in eps_list]
    if not eps:
        raise ValueError("empty eps list")
    if any(not 0.0 < e < 1.0 for e in eps):
        raise ValueError(f"eps values must lie in (0, 1), got {eps}")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps list must be strictly decreasing")
    return eps


def cluster_detect(eigenvalues, rel_tol: float = 1e-6, zero_tol: float = ZERO_EIG) -> list[list[int]]:
    """Maximal runs of consecutive near-equal eigenvalues, as 1-based mode numbers."""
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    lam = np.asarray(eigenvalues, dtype=float)
    if len(lam) == 0:
        return []
    clusters = [[1]]
    for i in range(1, len(lam)):
        a, b = lam[i - 1], lam[i]
        scale = max(abs(a), abs(b))
        close = scale <= zero_tol or abs(b - a) < rel_tol * scale
        if close:
            clusters[-1].append(i + 1)
        else:
            clusters.append([i + 1])
    return clusters


def empirical_rate(errors: Sequence[float], eps_list: Sequence[float]) -> float | None:
    """Least-squares slope of log(error) against log(eps).

    Returns ``math.inf`` if any error is exactly zero and None for fewer than two points.
    """
    err = np.asarray(errors, dtype=float)
    eps = np.asarray(eps_list, dtype=float)
    if len(err) != len(eps):
        raise ValueError("errors and eps_list differ in length")
    if len(err) < 2:
        return None
    if np.any(err == 0):
        return math.inf
    if np.any(err < 0) or np.any(~np.isfinite(err)):
        raise ValueError("errors must be positive and finite")
    return float(np.polyfit(np.log(eps), np.log(err), 1)[0])


def relative_error(lam_eps, lam0, zero_tol: float = ZERO_EIG):
    """|lam_eps - lam0| / |lam0|, or the absolute error where lam0 is (numerically) zero."""
    lam_eps, lam0 = np.asarray(lam_eps, float), np.asarray(lam0, float)
    denom = np.where(np.abs(lam0) > zero_tol, np.abs(lam0), 1.0)
    return np.abs(lam_eps - lam0) / denom


@dataclass
class ConvergenceReport:
    """Per-mode comparison of rod eigenpairs with the limit model across eps.

    Arrays indexed ``[i_eps, n - 1]``; failed eps columns hold NaN.
    """

    profile_id: str
    bc: str
    eps: list[float]
    k: int
    lambda0: np.ndarray
    lambda_eps: np.ndarray
    eig_distance: np.ndarray           # to the span of the k rod modes
    mode_distance: np.ndarray          # to the index-paired rod mode
    longitudinal_fraction: np.ndarray  # ||extend(section_average(u))||
    clusters: list[list[list[int]]]
    failed: dict[float, str] = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    runtimes: list[float] = field(default_factory=list)

    @property
    def rel_error(self) -> np.ndarray:
        return relative_error(self.lambda_eps, self.lambda0[None, :])

    @property
    def mu_eps(self) -> np.ndarray:
        """Eigenvalues of the solution operator: 1/lambda, or 1/(lambda + 1) for Neumann."""
        shift = 1.0 if self.bc == BC.NEUMANN.value else 0.0
        return 1.0 / (self.lambda_eps + shift)

    def rates(self) -> list[float | None] | None:
        ok = [i for i, e in enumerate(self.eps) if e not in self.failed]
        if len(ok) < 2:
            return None
        eps = [self.eps[i] for i in ok]
        return [empirical_rate(self.rel_error[ok, n], eps) for n in range(self.k)]

    def annotations(self) -> list[dict]:
        notes = []
        for i, e in enumerate(self.eps):
            for c in self.clusters[i]:
                if len(c) > 1:
                    notes.append({"epsilon": e, "cluster": c})
            for n in range(self.k):
                if self.longitudinal_fraction[i, n] < 0.5:
                    notes.append({"epsilon": e, "mode": n + 1, "transverse": True})
        return notes

    def to_dict(self, runtimes: bool = True) -> dict:
        rates = self.rates()
        modes = []
        for n in range(self.k):
            row = {
                "n": n + 1,
                "lambda0": float(self.lambda0[n]),
                "lambda_eps": _floats(self.lambda_eps[:, n]),
                "rel_error": _floats(self.rel_error[:, n]),
                "mu_eps": _floats(self.mu_eps[:, n]),
                "eig_distance": _floats(self.eig_distance[:, n]),
                "mode_distance": _floats(self.mode_distance[:, n]),
                "longitudinal_fraction": _floats(self.longitudinal_fraction[:, n]),
            }
            if rates is not None:
                r = rates[n]
                row["rate"] = "inf" if r == math.inf else r
            modes.append(row)
        out = {
            "schema_version": SCHEMA_VERSION,
            "profile": self.profile_id,
            "bc": self.bc,
            "eps": list(self.eps),
            "k": self.k,
            "modes": modes,
            "clusters": self.clusters,
            "annotations": self.annotations(),
            "failed": {str(e): msg for e, msg in self.failed.items()},
            "params": self.params,
        }
        if runtimes:
            out["runtimes"] = self.runtimes
        return out

    def write_json(self, path, runtimes: bool = True) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(runtimes), fh, indent=2)
            fh.write("\n")

    def write_csv(self, path) -> None:
        cols = ["n", "epsilon", "lambda0", "lambda_eps", "rel_error", "mu_eps",
                "eig_distance", "mode_distance", "longitudinal_fraction", "failed"]
        rel, mu = self.rel_error, self.mu_eps
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for n in range(self.k):
                for i, e in enumerate(self.eps):
                    w.writerow([n + 1, fmt(e), fmt(self.lambda0[n]), fmt(self.lambda_eps[i, n]),
                                fmt(rel[i, n]), fmt(mu[i, n]), fmt(self.eig_distance[i, n]),
                                fmt(self.mode_distance[i, n]), fmt(self.longitudinal_fraction[i, n]),
                                int(e in self.failed)])


def fmt(x) -> str:
    """17 significant digits: round-trip exact for doubles."""
    return f"{float(x):.17g}"


def _floats(a) -> list:
    return [None if not np.isfinite(v) else float(v) for v in a]


@dataclass
class RodSolve:
    """Rod eigenpairs at one eps, with the fields needed for reporting."""

    epsilon: float
    eigenvalues: np.ndarray
    fields: list[Field3D]
    residuals: np.ndarray
    meta: dict


class RodProblem:
    """Mesh and eps-independent matrices of one rod, reused across a sweep."""

    def __init__(self, profile: CrossSectionProfile, bc, n1: int = 128, n_sec: int = 8):
        self.profile = profile
        self.bc = BC.parse(bc)
        self.mesh = extrude_mesh(profile, n1, n_sec)
        self.A, self.B = assemble_split(self.mesh)
        self.M = assemble_mass(self.mesh)
        self.dofs = dofmap_3d(self.mesh, self.bc)

    def pencil(self, epsilon: float):
        return apply_dirichlet(stiffness_from_split(self.A, self.B, epsilon), self.M, self.dofs)

    def solve(self, epsilon: float, k: int, tol: float = DEFAULT_TOL, seed: int = 0) -> RodSolve:
        K, M = self.pencil(epsilon)
        if self.bc is BC.NEUMANN:
            spec = neumann_shift_solve(K, M, k, tol=tol, seed=seed)
        else:
            spec = smallest_eigs(K, M, k, tol=tol, seed=seed)
        U = self.dofs.expand(spec.eigenvectors)
        fields = [align_sign(Field3D(U[:, i], self.mesh)) for i in range(k)]
        return RodSolve(epsilon, spec.eigenvalues, fields, spec.residuals, spec.meta)

    def stationary(self, epsilon: float, rhs_field: Field3D) -> Field3D:
        """Solve Phi_eps(u, v) = (g, v)_{L2(G)}; Neumann uses the form with the mass term."""
        K = stiffness_from_split(self.A, self.B, epsilon)
        b = self.M @ rhs_field.values
        if self.bc is BC.NEUMANN:
            u = spla.spsolve(sp.csc_matrix(K + self.M), b)
        else:
            Kf, _ = apply_dirichlet(K, self.M, self.dofs)
            u = self.dofs.expand(spla.spsolve(sp.csc_matrix(Kf), b[self.dofs.free]))
        return Field3D(u, self.mesh)


def longitudinal_fraction(u: Field3D, mass) -> float:
    return l2_norm(extend(section_average(u), u.mesh), mass)


def sweep(profile: CrossSectionProfile, bc, eps_list=DEFAULT_EPS, k: int = 4,
          resolution_policy: ResolutionPolicy | None = None, tol: float = DEFAULT_TOL,
          seed: int = 0, profile_id: str | None = None,
          cluster_tol: float = 1e-6) -> ConvergenceReport:
    """Compare the first ``k`` rod eigenpairs with the limit model for each eps.

    Eigenvalues are paired by index. Eigenfunction errors are distances from
    each extended limit mode to the span of the ``k`` rod modes.
    """
    eps = _check_eps_list(eps_list)
    if k < 1:
        raise ValueError("k must be >= 1")
    policy = resolution_policy or ResolutionPolicy()
    bc = BC.parse(bc)
    limit = solve_limit_spectrum(profile, bc, k, policy.n_cells, tol=tol, seed=seed)
    modes0 = limit_modes(limit)
    prob = RodProblem(profile, bc, policy.mesh_n1, policy.n_sec)

    nan = np.full((len(eps), k), np.nan)
    lam, dist, pdist, frac = nan.copy(), nan.copy(), nan.copy(), nan.copy()
    clusters, failed, runtimes = [], {}, []
    for i, e in enumerate(eps):
        t0 = time.perf_counter()
        try:
            rs = prob.solve(e, k, tol=tol, seed=seed)
        except Exception as exc:          # a failed column is reported, not fatal
            log.warning("eps=%g failed: %s", e, exc)
            failed[e] = f"{type(exc).__name__}: {exc}"
            clusters.append([])
            runtimes.append(time.perf_counter() - t0)
            continue
        lam[i] = rs.eigenvalues
        for n in range(k):
            dist[i, n] = subspace_distance(rs.fields, modes0[n], mass=prob.M)
            pdist[i, n] = mode_distance(rs.fields[n], modes0[n], mass=prob.M)
            frac[i, n] = longitudinal_fraction(rs.fields[n], prob.M)
        clusters.append(cluster_detect(rs.eigenvalues, cluster_tol))
        runtimes.append(time.perf_counter() - t0)

    params = {"n1": policy.mesh_n1, "n_sec": policy.n_sec, "n_cells": policy.n_cells,
              "policy": policy.mode, "tol": tol, "seed": seed, "n_nodes": prob.mesh.n_nodes,
              "profile_spec": profile.to_dict()}
    return ConvergenceReport(profile_id or profile.name, bc.value, eps, k, limit.eigenvalues.copy(),
                             lam, dist, pdist, frac, clusters, failed, params, runtimes)


@dataclass
class VerificationTable:
    """Rows of a numerical check and the outcome of its assertions."""

    name: str
    columns: list[str]
    rows: list[dict]
    passed: bool
    failures: list[str] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([fmt(r[c]) if isinstance(r[c], float) else r[c] for c in self.columns])

    def to_dict(self) -> dict:
        return {"name": self.name, "columns": self.columns, "rows": self.rows,
                "passed": self.passed, "failures": self.failures}


DEFAULT_TEST_FUNCTIONS: Mapping[str, Callable] = {
    "1": lambda y: np.ones_like(y),
    "y1": lambda y: y,
    "sin(pi y1)": lambda y: np.sin(np.pi * y),
}
DEFAULT_C1_RESOLUTIONS = ((128, 8), (256, 8), (512, 8), (1024, 8))


def exact_geometry(profile: CrossSectionProfile) -> bool:
    """True when trilinear hexes represent G exactly (piecewise-affine heights)."""
    if profile.kind is Kind.PIECEWISE_RECTS:
        return True
    if profile.kind is Kind.RECT_HEIGHTS:
        return all(t.kind == "poly" and len(t.coeffs) <= 2
                   for h in profile.params["heights"] for t in h.terms)
    return False


def verify_C1(profile: CrossSectionProfile, mesh_resolutions=DEFAULT_C1_RESOLUTIONS,
              test_functions: Mapping[str, Callable] | None = None,
              tol: float | None = None) -> VerificationTable:
    """Isometry of the extension: ||R f||^2_{L2(G)} against the weighted norm of f.

    ``discrepancy`` uses the exact section area as weight and must be within
    ``tol`` at the finest resolution and non-increasing under refinement.
    ``consistent`` uses the weight induced by the mesh (E^T M E) and is a
    roundoff-level identity for every profile.
    """
    funcs = dict(DEFAULT_TEST_FUNCTIONS if test_functions is None else test_functions)
    if not funcs:
        raise ValueError("empty test family")
    exact = exact_geometry(profile)
    tol = (1e-12 if exact else 1e-6) if tol is None else tol
    rows, failures = [], []
    for n1, n_sec in mesh_resolutions:
        mesh = extrude_mesh(profile, n1, n_sec)
        M = assemble_mass(mesh)
        E = extension_matrix(mesh)
        M1 = weighted_mass(profile, mesh.layers)
        M1h = (E.T @ M @ E).tocsr()
        for name, func in funcs.items():
            f = Mode1D.from_function(func, mesh.layers)
            fe = extend(f, mesh).values
            lhs = float(fe @ (M @ fe))
            rhs = float(f.values @ (M1 @ f.values))
            rhs_h = float(f.values @ (M1h @ f.values))
            rows.append({"f": name, "n1": n1, "n_sec": n_sec, "norm_R": lhs, "norm_w": rhs,
                         "discrepancy": abs(lhs - rhs), "consistent": abs(lhs - rhs_h)})
    for name in funcs:
        seq = [r for r in rows if r["f"] == name]
        d = [r["discrepancy"] for r in seq]
        if d[-1] > tol:
            failures.append(f"f={name} n1={seq[-1]['n1']}: discrepancy {d[-1]:.3e} > {tol:.1e}")
        if not exact and any(b > a + 1e-13 for a, b in zip(d, d[1:])):
            failures.append(f"f={name}: discrepancy does not decay with resolution {d}")
        for r in seq:
            if r["consistent"] > 1e-12 * max(1.0, r["norm_R"]):
                failures.append(f"f={name} n1={r['n1']}: mesh-consistent identity off by {r['consistent']:.3e}")
    cols = ["f", "n1", "n_sec", "norm_R", "norm_w", "discrepancy", "consistent"]
    return VerificationTable("C1", cols, rows, not failures, failures)


def verify_C3(profile: CrossSectionProfile, bc, eps_list=DEFAULT_EPS,
              f: Callable | None = None, resolution_policy: ResolutionPolicy | None = None,
              final_tol: float = 1e-2) -> VerificationTable:
    """Stationary convergence: ||A_eps R f - R A_0 f||_{L2(G)} over the eps ladder.

    The limit solution is computed on the mesh stations, so the distance
    isolates the eps-dependence; ``floor`` is its gap to a 10x refined 1D
    solution. Asserts a non-increasing distance (slack 1e-10 ||f||) and a
    final value at most ``final_tol * ||f||_w``.
    """
    eps = _check_eps_list(eps_list)
    policy = resolution_policy or ResolutionPolicy()
    func = f or DEFAULT_TEST_FUNCTIONS["sin(pi y1)"]
    prob = RodProblem(profile, bc, policy.mesh_n1, policy.n_sec)
    layers = prob.mesh.layers
    f1 = Mode1D.from_function(func, layers)
    fnorm = float(np.sqrt(f1.values @ (weighted_mass(profile, layers) @ f1.values)))
    u0 = solve_stationary_1d(profile, prob.bc, f1)
    fine = np.concatenate([np.linspace(a, b, 11)[:-1] for a, b in zip(layers, layers[1:])] + [layers[-1:]])
    u0_fine = solve_stationary_1d(profile, prob.bc, Mode1D.from_function(func, fine))
    floor = l2_norm(Field3D(extend(u0, prob.mesh).values - extend(u0_fine, prob.mesh).values,
                            prob.mesh), prob.M)
    u0_ext = extend(u0, prob.mesh)
    rhs = extend(f1, prob.mesh)
    rows = []
    for e in eps:
        uf = prob.stationary(e, rhs)
        d = l2_norm(Field3D(uf.values - u0_ext.values, prob.mesh), prob.M)
        rows.append({"epsilon": e, "distance": d, "relative": d / fnorm if fnorm else 0.0,
                     "floor": floor, "norm_u0": u0.norm})
    failures = []
    dist = [r["distance"] for r in rows]
    slack = 1e-10 * max(fnorm, 1e-300)
    for r_prev, r in zip(rows, rows[1:]):
        if r["distance"] > r_prev["distance"] + slack:
            failures.append(f"eps={r['epsilon']}: distance {r['distance']:.3e} exceeds "
                            f"{r_prev['distance']:.3e} at eps={r_prev['epsilon']}")
    if dist[-1] > final_tol * fnorm + slack:
        failures.append(f"eps={eps[-1]}: distance {dist[-1]:.3e} > {final_tol:g} * ||f||_w = "
                        f"{final_tol * fnorm:.3e}")
    cols = ["epsilon", "distance", "relative", "floor", "norm_u0"]
    return VerificationTable(f"C3-{prob.bc.value}", cols, rows, not failures, failures)
