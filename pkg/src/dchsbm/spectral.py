"""Leading eigenpairs by absolute value, row normalisation and sgn(H) alignment."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError
from .seeding import stream

ZERO_ROW_EPS = 1e-12
DENSE_FALLBACK_N = 512


@dataclass(frozen=True, eq=False)
class SpectralEmbedding:
    eigenvalues: np.ndarray
    U: np.ndarray
    Ustar: np.ndarray
    zero_rows: frozenset
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    # |lambda_K| ties |lambda_{K+1}| within tolerance, so the selection is not unique
    degenerate: bool = False
    near_zero: tuple = ()
    method: str = "lanczos"

    @property
    def K(self) -> int:
        return self.U.shape[1]

    @property
    def n(self) -> int:
        return self.U.shape[0]


class DegenerateAlignmentWarning(RuntimeWarning):
    pass


def _operator(A):
    """(n, matvec, scale) for a SparseSymMatrix, scipy sparse matrix or ndarray."""
    if hasattr(A, "csr"):
        mat = A.csr
    elif sp.issparse(A):
        mat = sp.csr_matrix(A)
    else:
        mat = np.asarray(A, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("matrix must be square")
    if sp.issparse(mat):
        fro = float(np.sqrt((mat.data**2).sum()))
    else:
        fro = float(np.linalg.norm(mat))
    return mat.shape[0], (lambda x: mat @ x), fro


def _select(values: np.ndarray, K: int) -> np.ndarray:
    """Indices of the K values of largest |value|; ties by value desc, then position."""
    order = np.lexsort((np.arange(len(values)), -values, -np.abs(values)))
    return order[:K]


def _fix_signs(U: np.ndarray) -> np.ndarray:
    U = U.copy()
    for k in range(U.shape[1]):
        i = int(np.argmax(np.abs(U[:, k])))
        if U[i, k] < 0:
            U[:, k] = -U[:, k]
    return U


def _finish(values, vectors, K, scale, tol, all_values, residuals, method):
    vectors = _fix_signs(vectors)
    Ustar, zero = row_normalize(vectors)
    degenerate = False
    if len(all_values) > K:
        mags = np.sort(np.abs(all_values))[::-1]
        degenerate = bool(mags[K - 1] - mags[K] <= max(tol, 1e-12) * max(scale, 1e-300) * 10)
    near_zero = tuple(int(k) for k in np.flatnonzero(np.abs(values) <= 1e-10 * max(scale, 1e-300)))
    if scale == 0:
        near_zero = tuple(range(K))
    return SpectralEmbedding(
        np.asarray(values, dtype=float),
        vectors,
        Ustar,
        zero,
        np.asarray(residuals, dtype=float),
        degenerate,
        near_zero,
        method,
    )


def dense_eigenpairs(A, K: int) -> SpectralEmbedding:
    """Reference path: full symmetric eigendecomposition (LAPACK)."""
    if hasattr(A, "to_dense"):
        A = A.to_dense()
    elif sp.issparse(A):
        A = A.toarray()
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"K={K} outside [1, n={n}]")
    w, V = np.linalg.eigh((A + A.T) / 2)
    sel = _select(w, K)
    scale = float(np.max(np.abs(w))) if n else 0.0
    vecs = V[:, sel]
    res = np.linalg.norm(A @ vecs - vecs * w[sel], axis=0)
    return _finish(w[sel], vecs, K, scale, 1e-12, w, res, "dense")


def _orthogonalize(v, Q, passes=2):
    for _ in range(passes):
        if Q.shape[1]:
            v = v - Q @ (Q.T @ v)
    return v


def leading_eigenpairs(A, K: int, tol: float = 1e-10, seed: int = 0, max_steps: int | None = None,
                       max_basis: int | None = None, check_every: int = 4,
                       fallback: bool = True) -> SpectralEmbedding:
    """K eigenpairs of a symmetric matrix with the largest |lambda|.

    Lanczos with full (twice-applied) reorthogonalisation.  Ritz pairs are
    extracted by Rayleigh-Ritz on the whole basis, so both ends of the
    spectrum are available and merged by magnitude.  When the basis hits
    ``max_basis`` it is thick-restarted on the best Ritz vectors.  A pair is
    converged when ||A y - theta y|| <= tol * ||A|| (||A|| estimated by the
    largest |Ritz value|).  After convergence one fresh random direction is
    injected to expose eigenvalues the Krylov sequence cannot see (exact
    multiplicities); the run ends when that does not change the selection.
    """
    n, matvec, fro = _operator(A)
    if not 1 <= K <= n:
        raise ValueError(f"K={K} outside [1, n={n}]")
    if fro == 0.0:
        vecs = np.eye(n)[:, :K]
        return _finish(np.zeros(K), vecs, K, 0.0, tol, np.zeros(n), np.zeros(K), "zero")
    max_steps = max_steps if max_steps is not None else 50 * n
    max_basis = min(n, max_basis if max_basis is not None else max(6 * K + 60, 120))
    keep = min(max_basis // 2, 3 * K + 10)
    rng = stream(seed, "lanczos")

    Q = np.zeros((n, 0))
    AQ = np.zeros((n, 0))
    v = rng.standard_normal(n)
    steps = 0
    verified = False
    last_sel_values = None
    since_check = 0
    inject_at = 0
    probe_steps = min(n, 2 * K + 20)

    def rayleigh_ritz():
        Hm = Q.T @ AQ
        Hm = (Hm + Hm.T) / 2
        return np.linalg.eigh(Hm)

    while True:
        v = _orthogonalize(v, Q)
        nv = np.linalg.norm(v)
        if nv <= 1e-10 * fro or not np.isfinite(nv):
            # invariant subspace reached: continue from a fresh direction
            if Q.shape[1] >= n:
                v = None
            else:
                v = _orthogonalize(rng.standard_normal(n), Q)
                nv = np.linalg.norm(v)
        if v is not None:
            q = v / nv
            w = matvec(q)
            Q = np.column_stack([Q, q])
            AQ = np.column_stack([AQ, w])
            steps += 1
            since_check += 1
            v = w

        full = Q.shape[1] >= n
        if not (full or v is None or since_check >= check_every or Q.shape[1] >= max_basis):
            continue
        if Q.shape[1] < K and not full:
            continue
        since_check = 0
        theta, S = rayleigh_ritz()
        sel = _select(theta, K)
        Y = Q @ S[:, sel]
        R = AQ @ S[:, sel] - Y * theta[sel]
        res = np.linalg.norm(R, axis=0)
        anorm = float(np.max(np.abs(theta)))
        converged = bool(np.all(res <= tol * anorm))

        if converged or full or v is None:
            if full or v is None:
                break
            if not verified:
                verified = True
                last_sel_values = theta[sel].copy()
                inject_at = steps
                v = rng.standard_normal(n)
                continue
            if steps - inject_at < probe_steps:
                continue
            if np.allclose(theta[sel], last_sel_values, rtol=0, atol=tol * anorm * 10):
                break
            last_sel_values = theta[sel].copy()
            inject_at = steps
            v = rng.standard_normal(n)
            continue

        if steps >= max_steps:
            if fallback and n <= DENSE_FALLBACK_N:
                warnings.warn("Lanczos did not converge; using the dense solver", RuntimeWarning, stacklevel=2)
                return dense_eigenpairs(A if not hasattr(A, "to_dense") else A.to_dense(), K)
            raise NumericalError(f"Lanczos did not converge after {steps} steps; residuals {res.tolist()}")

        if Q.shape[1] >= max_basis:
            # thick restart on the Ritz vectors of largest |theta|
            kept = _select(theta, keep)
            worst = sel[int(np.argmax(res / np.maximum(anorm, 1e-300)))]
            v = AQ @ S[:, worst] - theta[worst] * (Q @ S[:, worst])
            Q = Q @ S[:, kept]
            AQ = AQ @ S[:, kept]

    # final explicit residuals against the operator itself
    theta, S = rayleigh_ritz()
    sel = _select(theta, K)
    Y = Q @ S[:, sel]
    Y /= np.linalg.norm(Y, axis=0)
    AY = np.column_stack([matvec(Y[:, k]) for k in range(K)])
    vals = np.einsum("ij,ij->j", Y, AY)
    res = np.linalg.norm(AY - Y * vals, axis=0)
    anorm = float(np.max(np.abs(theta)))
    return _finish(vals, Y, K, anorm, tol, theta, res, "lanczos")


def row_normalize(U: np.ndarray, eps: float = ZERO_ROW_EPS):
    """Unit-normalise rows; rows with norm <= eps stay zero and are reported."""
    U = np.asarray(U, dtype=float)
    norms = np.linalg.norm(U, axis=1)
    zero = norms <= eps
    out = np.zeros_like(U)
    out[~zero] = U[~zero] / norms[~zero, None]
    return out, frozenset(np.flatnonzero(zero).tolist())


def sign_align(Uhat: np.ndarray, U: np.ndarray, return_singular_values: bool = False, rcond: float = 1e-8):
    """Matrix sign of H = Uhat^T U: the orthogonal polar factor Ubar Vbar^T."""
    Uhat = np.asarray(Uhat, dtype=float)
    U = np.asarray(U, dtype=float)
    if Uhat.shape[1] != U.shape[1]:
        raise ValueError("both matrices need the same number of columns")
    H = Uhat.T @ U
    Ub, s, Vt = np.linalg.svd(H)
    if s.size and s.min() < rcond * max(s.max(), 1.0):
        warnings.warn(
            f"sgn(H) alignment degenerate: smallest singular value {s.min():.3g}",
            DegenerateAlignmentWarning,
            stacklevel=2,
        )
    O = Ub @ Vt
    if return_singular_values:
        return O, s
    return O


def two_to_infinity(X: np.ndarray) -> float:
    """Largest Euclidean row norm."""
    X = np.asarray(X)
    if X.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(X, axis=1)))


def principal_angles(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Principal angles between the column spans of X and Y (orthonormal inputs)."""
    # sines of the angles are the singular values of the residual (I - XX^T) Y
    s = np.linalg.svd(Y - X @ (X.T @ Y), compute_uv=False)
    return np.sort(np.arcsin(np.clip(s, 0.0, 1.0)))
