"""Dense real linear algebra used by the attack solvers.

The factorizations are backed by LAPACK through numpy; this module adds the
input validation, the descending/sign conventions every caller relies on, and
a cyclic Jacobi eigensolver kept for small matrices and cross-checks.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NotPositiveDefiniteError, SingularMatrixError, SymmetryError
from .tolerances import DEFAULT


@dataclass(frozen=True)
class SymEig:
    values: np.ndarray   # descending
    vectors: np.ndarray  # column k pairs with values[k]


@dataclass(frozen=True)
class SvdFactors:
    U: np.ndarray                # n x n
    singular_values: np.ndarray  # length m, descending
    V: np.ndarray                # m x m

    @property
    def sigma_min(self):
        return float(self.singular_values[-1])

    def sigma_matrix(self):
        n, m = self.U.shape[0], self.V.shape[0]
        out = np.zeros((n, m))
        out[:m, :m] = np.diag(self.singular_values)
        return out


def _as_matrix(S):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix has non-finite entries")
    return S


def _check_symmetric(S, tol):
    if S.shape[0] != S.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if S.size and np.max(np.abs(S - S.T)) > tol * scale:
        raise SymmetryError("matrix is not symmetric")


def _fix_signs(vectors, tol=1e-12):
    """Flip columns so the first entry that is not negligible is positive."""
    vectors = vectors.copy()
    for k in range(vectors.shape[1]):
        col = vectors[:, k]
        big = np.flatnonzero(np.abs(col) > tol * max(1.0, np.max(np.abs(col))))
        if big.size and col[big[0]] < 0:
            vectors[:, k] = -col
    return vectors


def jacobi_eig(S, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition; returns ascending (values, vectors)."""
    a = np.array(S, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * max(np.linalg.norm(a), np.finfo(float).tiny):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def sym_eig(S, method="lapack", tol=None):
    """Full spectrum of a symmetric matrix, sorted descending.

    ``method`` is ``"lapack"`` (default) or ``"jacobi"``. Eigenvectors follow
    the sign convention of a positive first non-negligible component.
    """
    tol = DEFAULT.symmetry if tol is None else tol
    S = _as_matrix(S)
    _check_symmetric(S, tol)
    S = 0.5 * (S + S.T)
    if method == "lapack":
        w, q = np.linalg.eigh(S)
    elif method == "jacobi":
        w, q = jacobi_eig(S)
    else:
        raise ValueError(f"unknown method {method!r}")
    w, q = w[::-1], q[:, ::-1]
    return SymEig(values=w.copy(), vectors=_fix_signs(q))


def sym_eigvals(S, method="lapack", tol=None):
    """Eigenvalues only, sorted descending."""
    tol = DEFAULT.symmetry if tol is None else tol
    S = _as_matrix(S)
    _check_symmetric(S, tol)
    S = 0.5 * (S + S.T)
    if method == "jacobi":
        return jacobi_eig(S)[0][::-1].copy()
    if method != "lapack":
        raise ValueError(f"unknown method {method!r}")
    return np.linalg.eigvalsh(S)[::-1].copy()


def svd(X):
    """Full SVD X = U Sigma V^T of a tall (or square) matrix."""
    X = _as_matrix(X)
    n, m = X.shape
    if n < m:
        raise DimensionError(f"svd expects rows >= cols, got {X.shape}")
    U, s, Vt = np.linalg.svd(X, full_matrices=True)
    V = Vt.T
    flip = np.ones(m)
    for k in range(m):
        col = V[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))
        if idx.size and col[idx[0]] < 0:
            flip[k] = -1.0
    V = V * flip
    U = U.copy()
    U[:, :m] = U[:, :m] * flip
    return SvdFactors(U=U, singular_values=s, V=V)


def pinv(X, factors=None, rank_tol=None):
    """Moore-Penrose inverse of a full-column-rank matrix."""
    rank_tol = DEFAULT.rank if rank_tol is None else rank_tol
    X = _as_matrix(X)
    f = svd(X) if factors is None else factors
    s = f.singular_values
    if s.size == 0 or s[-1] <= rank_tol * s[0]:
        raise SingularMatrixError("matrix is not of full column rank",
                                  sigma_min=float(s[-1]) if s.size else 0.0)
    m = X.shape[1]
    return (f.V / s) @ f.U[:, :m].T


def chol(S):
    """Upper-triangular U with S = U^T U."""
    S = _as_matrix(S)
    _check_symmetric(S, DEFAULT.symmetry)
    try:
        L = np.linalg.cholesky(0.5 * (S + S.T))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc
    return L.T.copy()


def inv_sqrt(S):
    """Symmetric R with R S R = I."""
    eig = sym_eig(S)
    if eig.values.size and eig.values[-1] <= 0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (smallest eigenvalue {eig.values[-1]:.3e})")
    q = eig.vectors
    R = (q / np.sqrt(eig.values)) @ q.T
    return 0.5 * (R + R.T)


def orthonormal_complement_vector(Q, seed_vector=None):
    """A unit vector orthogonal to the orthonormal columns of Q, or None."""
    n, k = Q.shape
    if k >= n:
        return None
    candidates = [] if seed_vector is None else [np.asarray(seed_vector, float)]
    candidates += [np.eye(n)[j] for j in np.argsort(np.sum(Q ** 2, axis=1))[:4]]
    for v in candidates:
        for _ in range(2):
            v = v - Q @ (Q.T @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            return v / nv
    return None
