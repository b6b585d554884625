"""Dense SDP interior point solver, trust-region subproblem and LMI helpers.

Problems are stated in inequality form

    minimize    c^T y + c0
    subject to  F0_j + sum_k y_k F_jk  >= 0   (PSD, one block per j)

which is the dual of a standard-form SDP. The solver is an infeasible
primal-dual path-following method with Nesterov-Todd scaling, Mehrotra's
centering heuristic and a dense Schur complement.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import matkit
from .errors import DimensionError
from .tolerances import DEFAULT


@dataclass
class LmiBlock:
    """Affine map y -> F0 + sum_k y_k F_k with F stored as (size*size, dim_y).

    Column k of ``F`` is the row-major flattening of F_k.
    """
    size: int
    F0: np.ndarray
    F: sp.csc_matrix

    def __post_init__(self):
        self.F0 = np.asarray(self.F0, float).reshape(self.size, self.size)
        self.F = sp.csc_matrix(self.F)
        if self.F.shape[0] != self.size * self.size:
            raise DimensionError("block coefficient matrix has the wrong row count")

    def evaluate(self, y):
        S = self.F0 + (self.F @ np.asarray(y, float)).reshape(self.size, self.size)
        return 0.5 * (S + S.T)


@dataclass
class SdpProblem:
    dim_y: int
    blocks: List[LmiBlock]
    cost: np.ndarray
    c0: float = 0.0
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.cost = np.asarray(self.cost, float).reshape(-1)
        if self.cost.size != self.dim_y:
            raise DimensionError("cost length does not match dim_y")
        for blk in self.blocks:
            if blk.F.shape[1] != self.dim_y:
                raise DimensionError("block column count does not match dim_y")

    def objective(self, y):
        return float(self.cost @ y + self.c0)

    def min_block_eig(self, y):
        return min(float(np.linalg.eigvalsh(b.evaluate(y))[0]) for b in self.blocks)


@dataclass
class SdpSolution:
    y_star: np.ndarray
    value: float
    status: str
    duality_gap: float
    iterations: int
    dual_value: float = float("nan")
    primal_infeasibility: float = float("nan")
    dual_infeasibility: float = float("nan")
    X: list = field(default_factory=list)
    history: list = field(default_factory=list)


@dataclass
class TrustRegionResult:
    x_star: np.ndarray
    value: float
    multiplier: float
    boundary: bool
    hard_case: bool = False


def _sym(S):
    return 0.5 * (S + S.T)


def _max_step(S, dS, frac=0.98):
    """Largest alpha <= 1 keeping S + alpha dS positive definite, damped."""
    L = np.linalg.cholesky(S)
    T = sla.solve_triangular(L, dS, lower=True)
    T = sla.solve_triangular(L, T.T, lower=True)
    lam = np.linalg.eigvalsh(_sym(T))[0]
    if lam >= 0:
        return 1.0
    return min(1.0, -frac / lam)


def _nt_scaling(X, Z):
    Lx = np.linalg.cholesky(X)
    Lz = np.linalg.cholesky(Z)
    U, s, Vt = np.linalg.svd(Lz.T @ Lx)
    G = Lx @ Vt.T / np.sqrt(s)
    return G @ G.T


class _BlockOps:
    """Adjoint pairs A(X) = [<F_k, X>]_k and A^T(u) = sum_k u_k F_k per block."""

    def __init__(self, blk):
        self.size = blk.size
        self.F = blk.F
        self.FT = blk.F.T.tocsr()
        # per-column (row, col, value) triplets over the upper triangle only;
        # W F W = H + H^T with H built from p <= q (diagonal entries halved)
        Fc = blk.F.tocsc()
        self.cols = []
        for k in range(Fc.shape[1]):
            lo, hi = Fc.indptr[k], Fc.indptr[k + 1]
            idx, val = Fc.indices[lo:hi], Fc.data[lo:hi]
            p, q = idx // blk.size, idx % blk.size
            keep = p <= q
            v = np.where(p[keep] == q[keep], 0.5, 1.0) * val[keep]
            self.cols.append((p[keep], q[keep], v))

    def A(self, X):
        return self.FT @ X.reshape(-1)

    def AT(self, u):
        return (self.F @ u).reshape(self.size, self.size)

    def schur(self, W, M, chunk=32):
        """Add M_kl = <F_k, W F_l W> into M.

        F_l is symmetric, so F_k . (H + H^T) = 2 F_k . H with H the
        upper-triangle half of W F_l W. Small chunks keep Y cache-resident.
        """
        s = self.size
        dim = len(self.cols)
        for start in range(0, dim, chunk):
            stop = min(dim, start + chunk)
            Y = np.zeros((stop - start, s, s))
            for j, k in enumerate(range(start, stop)):
                p, q, v = self.cols[k]
                if v.size:
                    np.matmul(W[:, p] * v, W[q, :], out=Y[j])
            R = self.FT @ np.ascontiguousarray(Y.reshape(stop - start, -1).T)
            M[start:stop, :] += 2.0 * R.T


def solve_sdp(problem: SdpProblem, tol=None, max_iter=None, verbose=False) -> SdpSolution:
    """Solve an inequality-form SDP; see the module docstring for the form."""
    tol = DEFAULT.sdp_gap if tol is None else tol
    max_iter = DEFAULT.sdp_max_iter if max_iter is None else max_iter
    ops = [_BlockOps(b) for b in problem.blocks]
    C = [b.F0 for b in problem.blocks]
    bvec = problem.cost
    dim = problem.dim_y
    total = sum(b.size for b in problem.blocks)

    normA = np.sqrt(np.asarray(sum(o.F.multiply(o.F).sum(axis=0) for o in ops)).reshape(-1))
    normC = np.sqrt(sum(float(np.sum(Cj * Cj)) for Cj in C))
    normb = float(np.linalg.norm(bvec))
    X, Z = [], []
    for o, Cj in zip(ops, C):
        s = o.size
        xi = max(10.0, np.sqrt(s), s * float(np.max((1.0 + np.abs(bvec)) / (1.0 + normA))))
        et = max(10.0, np.sqrt(s), float(np.max(normA)), normC)
        X.append(xi * np.eye(s))
        Z.append(et * np.eye(s))
    u = np.zeros(dim)

    def residuals(X, Z, u):
        Rp = bvec - sum(o.A(Xj) for o, Xj in zip(ops, X))
        Rd = [_sym(Cj - Zj - o.AT(u)) for o, Cj, Zj in zip(ops, C, Z)]
        return Rp, Rd

    status = "max_iter"
    hist = []
    best, best_merit, since_best = None, np.inf, 0
    it = 0
    for it in range(1, max_iter + 1):
        Rp, Rd = residuals(X, Z, u)
        pobj = sum(float(np.sum(Cj * Xj)) for Cj, Xj in zip(C, X))
        dobj = float(bvec @ u)
        gap = sum(float(np.sum(Xj * Zj)) for Xj, Zj in zip(X, Z))
        mu = gap / total
        pinf = float(np.linalg.norm(Rp)) / (1.0 + normb)
        dinf = np.sqrt(sum(float(np.sum(R * R)) for R in Rd)) / (1.0 + normC)
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        hist.append((pobj, dobj, relgap, pinf, dinf))
        if verbose:
            print(f"{it:3d} p={pobj:+.9e} d={dobj:+.9e} gap={relgap:.2e} pinf={pinf:.2e} dinf={dinf:.2e}")
        # roundoff in the Schur solve can leave pinf stuck near 1e-8 while the
        # gap keeps shrinking, so the merit ignores pinf below the accept level
        merit = max(relgap, dinf) if pinf <= DEFAULT.sdp_accept_feas else np.inf
        if merit < best_merit:
            best, best_merit, since_best = (X, Z, u, relgap, pinf, dinf), merit, 0
        else:
            since_best += 1
        if relgap <= tol and pinf <= DEFAULT.sdp_feas and dinf <= DEFAULT.sdp_feas:
            status = "optimal"
            break
        if max(np.max(np.abs(u)), max(np.max(np.abs(Xj)) for Xj in X)) > 1e13:
            status = "infeasible"
            break
        if since_best >= 8:
            break

        try:
            W = [_nt_scaling(Xj, Zj) for Xj, Zj in zip(X, Z)]
        except np.linalg.LinAlgError:
            break
        M = np.zeros((dim, dim))
        for o, Wj in zip(ops, W):
            o.schur(Wj, M)
        M = _sym(M)
        M[np.diag_indices(dim)] += 1e-15 * max(1.0, float(np.max(np.diag(M))))
        try:
            Mfac = sla.cho_factor(M, lower=True, check_finite=False)
            msolve = lambda r: sla.cho_solve(Mfac, r, check_finite=False)
        except np.linalg.LinAlgError:
            Mp = np.linalg.pinv(M, hermitian=True)
            msolve = lambda r: Mp @ r
        Zinv = [np.linalg.inv(Zj) for Zj in Z]

        def direction(sig):
            Rc = [_sym(sig * mu * Zi - Xj) for Zi, Xj in zip(Zinv, X)]
            rhs = Rp - sum(o.A(Rcj - Wj @ Rdj @ Wj) for o, Rcj, Wj, Rdj in zip(ops, Rc, W, Rd))
            du = msolve(rhs)
            du = du + msolve(rhs - M @ du)   # one refinement step
            dZ = [_sym(Rdj - o.AT(du)) for o, Rdj in zip(ops, Rd)]
            dX = [_sym(Rcj - Wj @ dZj @ Wj) for Rcj, Wj, dZj in zip(Rc, W, dZ)]
            return dX, dZ, du

        def steps(dX, dZ, frac):
            ap = min(_max_step(Xj, dXj, frac) for Xj, dXj in zip(X, dX))
            ad = min(_max_step(Zj, dZj, frac) for Zj, dZj in zip(Z, dZ))
            return ap, ad

        try:
            dX, dZ, du = direction(0.0)
            ap, ad = steps(dX, dZ, 1.0)
            gap_aff = sum(float(np.sum((Xj + ap * a) * (Zj + ad * b)))
                          for Xj, a, Zj, b in zip(X, dX, Z, dZ))
            sigma = min(1.0, (gap_aff / gap) ** 3) if gap > 0 else 0.0
            sigma = max(sigma, 1e-4 if relgap > 1e-6 else 0.0)
            dX, dZ, du = direction(sigma)
            ap, ad = steps(dX, dZ, 0.98)
        except np.linalg.LinAlgError:
            break
        X = [_sym(Xj + ap * a) for Xj, a in zip(X, dX)]
        Z = [_sym(Zj + ad * b) for Zj, b in zip(Z, dZ)]
        u = u + ad * du

    if status != "optimal" and best is not None:
        # stalled or out of iterations: fall back to the best iterate and
        # accept it when it meets the looser acceptance tolerances
        X, Z, u, relgap, pinf, dinf = best
        if (status != "infeasible" and relgap <= DEFAULT.sdp_accept_gap
                and pinf <= DEFAULT.sdp_accept_feas and dinf <= DEFAULT.sdp_accept_gap):
            status = "optimal"
    y = -u
    Rp, Rd = residuals(X, Z, u)
    value = problem.objective(y)
    dual_value = -sum(float(np.sum(Cj * Xj)) for Cj, Xj in zip(C, X)) + problem.c0
    pinf = float(np.linalg.norm(Rp)) / (1.0 + normb)
    dinf = np.sqrt(sum(float(np.sum(R * R)) for R in Rd)) / (1.0 + normC)
    return SdpSolution(y_star=y, value=value, status=status,
                       duality_gap=abs(value - dual_value), iterations=it,
                       dual_value=dual_value, primal_infeasibility=pinf,
                       dual_infeasibility=dinf, X=X, history=hist)


def trust_region(A, b, radius, tol=1e-14, max_iter=200) -> TrustRegionResult:
    """Global minimizer of x^T A x + 2 b^T x over ||x|| <= radius."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    A = np.asarray(A, float)
    b = np.asarray(b, float).reshape(-1)
    if A.shape != (b.size, b.size):
        raise DimensionError("A and b are not conformable")
    lam, Q = np.linalg.eigh(0.5 * (A + A.T))   # ascending
    bt = Q.T @ b
    lmin = lam[0]
    scale = max(1.0, float(np.max(np.abs(lam))))

    def value(x):
        return float(x @ A @ x + 2.0 * b @ x)

    def xnorm(mu):
        return float(np.sqrt(np.sum((bt / (lam + mu)) ** 2)))

    if lmin > 1e-14 * scale:
        x = -Q @ (bt / lam)
        if np.linalg.norm(x) <= radius:
            return TrustRegionResult(x, value(x), 0.0, False)

    lo = max(0.0, -lmin)
    # hard case: b has (numerically) no weight on the bottom eigenspace
    bottom = lam <= lmin + 1e-10 * scale
    if np.all(np.abs(bt[bottom]) <= 1e-12 * max(1.0, np.linalg.norm(b))) and lmin <= 0:
        rest = ~bottom
        w = np.zeros_like(bt)
        w[rest] = -bt[rest] / (lam[rest] + lo)
        nw = np.linalg.norm(w)
        if nw <= radius:
            tau = np.sqrt(max(radius ** 2 - nw ** 2, 0.0))
            w[np.flatnonzero(bottom)[0]] = tau
            x = Q @ w
            return TrustRegionResult(x, value(x), lo, True, hard_case=True)

    hi = lo + np.linalg.norm(b) / radius + 1e-300
    while xnorm(hi) > radius:
        hi = lo + 2.0 * (hi - lo)
    # start just right of the pole
    mu = hi
    for _ in range(max_iter):
        d = lam + mu
        xn = xnorm(mu)
        phi = 1.0 / xn - 1.0 / radius
        if abs(xn - radius) <= tol * radius or hi - lo <= 1e-16 * max(1.0, hi):
            break
        if phi < 0:
            lo = mu
        else:
            hi = mu
        dphi = np.sum(bt ** 2 / d ** 3) / xn ** 3
        step = mu - phi / dphi
        mu = step if lo < step < hi else 0.5 * (lo + hi)
    x = -Q @ (bt / (lam + mu))
    return TrustRegionResult(x, value(x), float(mu), True)


def min_eig_affine(M0, directions=(), t=()):
    """Smallest eigenvalue of M0 + sum_k t_k M_k."""
    S = np.array(M0, dtype=float)
    directions = list(directions)
    t = np.atleast_1d(np.asarray(t, float)) if len(directions) else np.zeros(0)
    if len(directions) != t.size:
        raise DimensionError("number of directions and parameters differ")
    for tk, Mk in zip(t, directions):
        Mk = np.asarray(Mk, float)
        if Mk.shape != S.shape:
            raise DimensionError("direction shape does not match M0")
        S = S + tk * Mk
    return float(matkit.sym_eigvals(S, tol=1e-8)[-1])
