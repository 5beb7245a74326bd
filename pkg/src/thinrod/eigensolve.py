"""
Smallest eigenpairs of symmetric-definite pencils K u = lambda M u.

The sparse route is shift-invert Lanczos on T = (K - sigma M)^-1 M, which is
self-adjoint in the M inner product, with full reorthogonalization. A single
Krylov sequence sees only one direction per eigenspace, so after the wanted
pairs converge the solver restarts from fresh random vectors deflated
against the converged ones until no smaller eigenvalue is found; this picks
up exact multiplicities (e.g. symmetric sections). A Rayleigh-Ritz step on
the collected vectors gives the reported values.

The dense route (Cholesky of M, then a standard symmetric solve) is the
independent oracle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_SHIFT = -0.1


class EigenSolveError(RuntimeError):
    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals


@dataclass
class Spectrum:
    """Ascending eigenvalues with M-orthonormal eigenvectors (columns).

    ``residuals`` are ||K u - lambda M u|| / ||M u|| per pair. For pencils
    obtained by elimination, ``eigenvectors`` live on the free dofs; see
    :meth:`full_vectors`.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    bc: str | None = None
    epsilon: float | None = None
    shift: float = 0.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)

    def full_vectors(self, dofs) -> np.ndarray:
        return dofs.expand(self.eigenvectors)


def _residuals(K, M, lam, X) -> np.ndarray:
    MX = M @ X
    R = K @ X - MX * lam[None, :]
    return np.linalg.norm(R, axis=0) / np.linalg.norm(MX, axis=0)


def _factorize(A: sp.spmatrix):
    lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    d = np.abs(lu.U.diagonal())
    if not np.all(np.isfinite(d)) or d.min() <= 1e-14 * d.max():
        raise RuntimeError("factorization is numerically singular")
    return lu.solve


class _Lanczos:
    """Shift-inverted Lanczos in the M inner product with locking."""

    def __init__(self, solve, M, rng, tol, max_steps):
        self.solve, self.M, self.rng = solve, M, rng
        self.tol, self.max_steps = tol, max_steps
        self.n = M.shape[0]
        self.X = np.empty((self.n, 0))    # locked vectors
        self.MX = np.empty((self.n, 0))
        self.steps = 0

    def _project_out(self, w, Mw, Q, MQ):
        for _ in range(2):
            for B, MB in ((self.X, self.MX), (Q, MQ)):
                if B.shape[1]:
                    c = MB.T @ w
                    w = w - B @ c
                    Mw = Mw - MB @ c
        return w, Mw

    def _start(self, Q, MQ):
        for _ in range(5):
            w = self.rng.standard_normal(self.n)
            w, Mw = self._project_out(w, self.M @ w, Q, MQ)
            nrm = np.sqrt(max(w @ Mw, 0.0))
            if nrm > 1e-8:
                return w / nrm, Mw / nrm
        raise EigenSolveError("could not find a start vector outside the current subspace")

    def run(self, k_want):
        """Top ``k_want`` Ritz pairs of T restricted to the complement of the locked set."""
        n_free = self.n - self.X.shape[1]
        m_cap = min(self.max_steps, n_free)
        Q = np.empty((self.n, m_cap))
        MQ = np.empty((self.n, m_cap))
        alpha = np.zeros(m_cap)
        beta = np.zeros(m_cap)
        Q[:, 0], MQ[:, 0] = self._start(Q[:, :0], MQ[:, :0])
        theta = S = None
        for j in range(m_cap):
            self.steps += 1
            w = self.solve(MQ[:, j])
            alpha[j] = MQ[:, j] @ w
            w = w - alpha[j] * Q[:, j]
            if j:
                w = w - beta[j - 1] * Q[:, j - 1]
            w, Mw = self._project_out(w, self.M @ w, Q[:, :j + 1], MQ[:, :j + 1])
            b = np.sqrt(max(w @ Mw, 0.0))
            theta, S = sla.eigh_tridiagonal(alpha[:j + 1], beta[:j]) if j else (alpha[:1], np.ones((1, 1)))
            top = np.argsort(theta)[::-1][:k_want]
            est = np.abs(b * S[-1, top])
            if j + 1 >= k_want and np.all(est <= self.tol * np.abs(theta[top])):
                return theta[top], Q[:, :j + 1] @ S[:, top], est / np.abs(theta[top])
            if j + 1 == m_cap:
                break
            scale = max(np.abs(alpha[:j + 1]).max(), 1e-300)
            if b <= 1e-12 * scale:
                # invariant subspace: continue with a decoupled fresh direction
                beta[j] = 0.0
                Q[:, j + 1], MQ[:, j + 1] = self._start(Q[:, :j + 1], MQ[:, :j + 1])
            else:
                beta[j] = b
                Q[:, j + 1], MQ[:, j + 1] = w / b, Mw / b
        m = min(j + 1, m_cap)
        if m == n_free:
            # the whole complement is spanned: Ritz pairs are exact
            top = np.argsort(theta)[::-1][:k_want]
            return theta[top], Q[:, :m] @ S[:, top], np.zeros(len(top))
        top = np.argsort(theta)[::-1][:k_want]
        raise EigenSolveError(f"Lanczos did not converge in {m} steps",
                              residuals=np.abs(b * S[-1, top]) / np.abs(theta[top]))

    def lock(self, V):
        self.X = np.hstack([self.X, V])
        self.MX = self.M @ self.X


def _default_shift(K, M) -> float:
    return DEFAULT_SHIFT


def smallest_eigs(K, M, k: int, tol: float = DEFAULT_TOL, seed: int = 0,
                  sigma: float | None = None) -> Spectrum:
    """The ``k`` smallest eigenpairs of the pencil (K, M) for K PSD, M PD."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    K, M = sp.csr_matrix(K), sp.csr_matrix(M)
    n = K.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds the dimension {n}")
    sigma = _default_shift(K, M) if sigma is None else float(sigma)
    try:
        solve = _factorize(K - sigma * M)
    except RuntimeError:
        sigma = sigma - 0.1 * max(abs(sigma), 1.0)
        log.warning("factorization failed, retrying with shift %g", sigma)
        try:
            solve = _factorize(K - sigma * M)
        except RuntimeError as exc:
            raise EigenSolveError(f"factorization of K - sigma M failed at sigma={sigma}") from exc

    rng = np.random.default_rng(seed)
    lz = _Lanczos(solve, M, rng, tol, max_steps=10 * k + 200)
    theta, V, est = lz.run(k)
    lz.lock(V)
    thetas = list(theta)
    ritz = [float(est.max())]
    # multiplicity check: look for directions missed by the first Krylov sequence
    while lz.X.shape[1] < n:
        th, v, e1 = lz.run(1)
        kth = sorted(thetas, reverse=True)[k - 1]
        if th[0] <= kth * (1.0 + 1e-9):
            break
        lz.lock(v)
        thetas.append(th[0])
        ritz.append(float(e1[0]))

    # Rayleigh-Ritz for T rather than K: X^T K X loses small eigenvalues to
    # cancellation when ||K|| is large, while theta keeps absolute accuracy
    X, MX = lz.X, lz.MX
    H = MX.T @ np.column_stack([solve(MX[:, j]) for j in range(MX.shape[1])])
    G = X.T @ MX
    theta, C = sla.eigh(0.5 * (H + H.T), 0.5 * (G + G.T))
    order = np.argsort(theta)[::-1][:k]
    lam = sigma + 1.0 / theta[order]
    X = X @ C[:, order]
    res = _residuals(K, M, lam, X)
    return Spectrum(lam, X, res, shift=sigma,
                    meta={"lanczos_steps": lz.steps, "tol": tol, "seed": seed,
                          "ritz_residual": max(ritz)})


def dense_eigs(K, M) -> Spectrum:
    """Full spectrum by Cholesky reduction (oracle for small pencils)."""
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K, dtype=float)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    if Kd.shape[0] > 4000:
        raise ValueError("dense_eigs is limited to dimension 4000")
    try:
        L = sla.cholesky(0.5 * (Md + Md.T), lower=True)
    except sla.LinAlgError as exc:
        raise EigenSolveError("mass matrix is not positive definite") from exc
    C = sla.solve_triangular(L, sla.solve_triangular(L, 0.5 * (Kd + Kd.T), lower=True).T, lower=True)
    lam, Y = sla.eigh(0.5 * (C + C.T))
    X = sla.solve_triangular(L.T, Y, lower=False)
    return Spectrum(lam, X, _residuals(Kd, Md, lam, X), meta={"dense": True})


def neumann_shift_solve(K, M, k: int, tol: float = DEFAULT_TOL, seed: int = 0) -> Spectrum:
    """Solve (K + M) u = mu M u at shift 0 and report lambda = mu - 1."""
    K, M = sp.csr_matrix(K), sp.csr_matrix(M)
    spec = smallest_eigs(K + M, M, k, tol=tol, seed=seed, sigma=0.0)
    shifted = spec.eigenvalues
    lam = shifted - 1.0
    spec = Spectrum(lam, spec.eigenvectors, _residuals(K, M, lam, spec.eigenvectors),
                    shift=spec.shift, meta=dict(spec.meta, shifted_eigenvalues=shifted))
    return spec


def sign_normalize(v: np.ndarray, probe: np.ndarray | None = None) -> np.ndarray:
    """Flip ``v`` so the first significant entry of ``probe`` (default ``v``) is positive."""
    p = v if probe is None else probe
    big = np.abs(p) > 1e-8 * np.abs(p).max() if np.any(p) else np.zeros(len(p), bool)
    if np.any(big) and p[np.argmax(big)] < 0:
        return -v
    return v
