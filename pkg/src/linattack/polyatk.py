"""Attack one coefficient while holding the others: a quartic over a ball.

For a poison point z = [x0; y0] with ||z|| <= eta, set
    w = z / sqrt(1 + z^T A2 z),   x = U w,   U^T U = I + eta^2 A2.
Then the refit deviation is  beta_hat - beta0 = Hq x (e^T x)  and the ball
||z|| <= eta maps exactly onto ||x|| <= eta, so the weighted objective

    q(x) = 1/2 (Hq x e^T x - b)^T Lambda (Hq x e^T x - b)

is a degree-4 polynomial over a ball, solved globally with a moment
relaxation.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import matkit
from .errors import InfeasibleRecoveryError
from .lasserre import (PolynomialProgram, poly_add, poly_clean, poly_mul, poly_scale_vars,
                       solve_relaxation)
from .pgd import grad_quartic
from .regress import PoisonPoint, RegressionFit, refit_add_point


@dataclass(frozen=True)
class QuarticProgram:
    Hq: np.ndarray
    e: np.ndarray
    b: np.ndarray
    Lambda: np.ndarray
    U: np.ndarray
    A2: np.ndarray
    eta: float
    lam: float
    i: int

    @property
    def dim(self):
        return self.e.size

    def residual(self, X):
        X = np.atleast_2d(X)
        return (X @ self.Hq.T) * (X @ self.e)[:, None] - self.b

    def value(self, X):
        X = np.asarray(X, float)
        r = self.residual(X)
        v = 0.5 * np.einsum("ij,j,ij->i", r, self.Lambda, r)
        return float(v[0]) if X.ndim == 1 else v


def build_quartic(fit: RegressionFit, i: int, eta: float, lam: float) -> QuarticProgram:
    if not 0 <= i < fit.m:
        raise IndexError(f"coefficient index {i} out of range for m={fit.m}")
    if not eta > 0:
        raise ValueError("eta must be positive")
    m = fit.m
    A = fit.gram_inv
    A1 = np.hstack([A, np.zeros((m, 1))])
    A2 = np.zeros((m + 1, m + 1))
    A2[:m, :m] = A
    U = matkit.chol(np.eye(m + 1) + eta ** 2 * A2)
    Uinv = np.linalg.inv(U)
    c = np.concatenate([-fit.beta0, [1.0]])
    b = np.zeros(m)
    b[i] = -fit.beta0[i]
    Lam = np.ones(m)
    Lam[i] = lam
    return QuarticProgram(Hq=A1 @ Uinv, e=Uinv.T @ c, b=b, Lambda=Lam, U=U, A2=A2,
                          eta=float(eta), lam=float(lam), i=i)


def bilevel_objective(fit: RegressionFit, i: int, lam: float, beta_hat) -> float:
    """1/2 lam beta_i^2 + 1/2 sum_{j != i} (beta_j - beta0_j)^2."""
    d = np.asarray(beta_hat, float) - fit.beta0
    d[i] = beta_hat[i]
    w = np.ones(fit.m)
    w[i] = lam
    return float(0.5 * np.sum(w * d * d))


def point_to_x(qp: QuarticProgram, x0, y0) -> np.ndarray:
    z = np.concatenate([np.asarray(x0, float), [float(y0)]])
    w = z / np.sqrt(1.0 + z @ qp.A2 @ z)
    return qp.U @ w


def as_polynomial(qp: QuarticProgram) -> PolynomialProgram:
    n = qp.dim
    unit = [tuple(int(k == j) for k in range(n)) for j in range(n)]
    zero = tuple([0] * n)
    lin_e = {unit[j]: qp.e[j] for j in range(n)}
    obj = {zero: 0.0}
    for r in range(qp.Hq.shape[0]):
        lin_h = {unit[j]: qp.Hq[r, j] for j in range(n)}
        res = poly_add(poly_mul(lin_h, lin_e), {zero: -qp.b[r]})
        obj = poly_add(obj, poly_mul(res, res), 0.5 * qp.Lambda[r])
    ball = {zero: qp.eta ** 2}
    for j in range(n):
        ball[tuple(2 * int(k == j) for k in range(n))] = -1.0
    return PolynomialProgram(n, poly_clean(obj), [ball])


def recover_attack(x_star, qp: QuarticProgram, fit: RegressionFit = None) -> PoisonPoint:
    x_star = np.asarray(x_star, float)
    if np.linalg.norm(x_star) > qp.eta * (1 + 1e-8):
        raise InfeasibleRecoveryError("x* lies outside the budget ball")
    w = np.linalg.solve(qp.U, x_star)
    s2 = 1.0 - w @ qp.A2 @ w
    if not s2 > 0:
        raise InfeasibleRecoveryError(f"1 - w^T A2 w = {s2:.3e} is not positive")
    s = np.sqrt(s2)
    m = qp.dim - 1
    p = PoisonPoint(x0=w[:m] / s, y0=float(w[m] / s), meta={"i": qp.i, "lambda": qp.lam, "eta": qp.eta})
    p.predicted_value = qp.value(x_star)
    if fit is not None:
        p.predicted_beta = refit_add_point(fit, p)
    return p


@dataclass
class QuarticSolution:
    point: PoisonPoint
    x_star: np.ndarray
    value: float
    lower_bound: float
    certified: bool
    order: int
    ranks: tuple
    cut: np.ndarray = None
    tiebreak: float = 0.0
    attempts: list = field(default_factory=list)

    @property
    def gap(self):
        return self.value - self.lower_bound


def _cut_directions(n, seed, count):
    rng = np.random.Generator(np.random.Philox(seed))
    base = 1.0 / np.arange(1, n + 1)
    yield base / np.linalg.norm(base)
    for _ in range(count - 1):
        r = rng.standard_normal(n)
        yield r / np.linalg.norm(r)


def _polish(qp, x):
    eta = qp.eta
    cons = {"type": "ineq", "fun": lambda v: eta ** 2 - v @ v, "jac": lambda v: -2 * v}
    res = minimize(lambda v: qp.value(v), x, jac=lambda v: grad_quartic(qp, v), method="SLSQP",
                   constraints=[cons], options={"ftol": 1e-15, "maxiter": 200})
    xn = res.x
    nn = np.linalg.norm(xn)
    if nn > eta:
        xn = xn * (eta / nn)
    return xn if qp.value(xn) < qp.value(x) else x


def _unit_program(qp):
    """Objective in u = x / eta, normalized by its largest coefficient."""
    obj = poly_scale_vars(as_polynomial(qp).objective, qp.eta)
    norm = max(abs(c) for c in obj.values()) or 1.0
    n = qp.dim
    ball = {tuple([0] * n): 1.0}
    for j in range(n):
        ball[tuple(2 * int(k == j) for k in range(n))] = -1.0
    return {a: c / norm for a, c in obj.items()}, norm, ball


def solve_quartic(qp: QuarticProgram, fit: RegressionFit = None, orders=(2, 3), cut=True,
                  tiebreaks=(1e-3, 1e-2), seed=0, tries=2, polish=True, **sdp_kw) -> QuarticSolution:
    """Global minimizer of q over the ball through the moment hierarchy.

    q is even, so minimizers come in +-x pairs and the relaxation optimum is a
    symmetric two-atom measure; a halfspace r^T x >= 0 keeps one of each pair.
    When the minimizers form a continuum (for example when the target can be
    zeroed exactly inside the ball) no relaxation is flat, so a small
    ``eps ||u||^2`` term selects the least-energy minimizer; the extracted
    point is then polished on the true objective. ``lower_bound`` always comes
    from the unregularized relaxation.
    """
    n = qp.dim
    obj, norm, ball = _unit_program(qp)
    attempts = []
    lower = -np.inf
    fallback = None
    for N in orders:
        for eps in (0.0,) + tuple(tiebreaks):
            dirs = list(_cut_directions(n, seed, tries if eps == 0 else 1)) if cut else [None]
            o = dict(obj)
            for j in range(n):
                sq = tuple(2 * int(k == j) for k in range(n))
                o[sq] = o.get(sq, 0.0) + eps
            for r in dirs:
                cons = [ball]
                if r is not None:
                    cons.append({tuple(int(k == j) for k in range(n)): float(r[j]) for j in range(n)})
                res = solve_relaxation(PolynomialProgram(n, o, cons), N, **sdp_kw)
                cert = res.certificate
                attempts.append({"order": N, "tiebreak": eps, "rank_ok": cert.rank_ok,
                                 "ranks": (cert.rank_full, cert.rank_low), "status": res.sdp.status})
                if eps == 0 and res.sdp.status == "optimal":
                    lower = max(lower, res.sdp.dual_value * norm)
                if fallback is None:
                    fallback = (res, N, r, eps)
                if cert.extracted and res.sdp.status == "optimal":
                    return _finish(qp, fit, cert.minimizers[0], lower, True, N,
                                   (cert.rank_full, cert.rank_low), r, eps, attempts, polish)
    res, N, r, eps = fallback
    cert = res.certificate
    return _finish(qp, fit, res.moments.first_moments(), lower, False, N,
                   (cert.rank_full, cert.rank_low), r, eps, attempts, polish)


def _finish(qp, fit, u, lower, certified, N, ranks, r, eps, attempts, polish):
    nu = np.linalg.norm(u)
    if nu > 1.0:
        u = u / nu
    x = qp.eta * u
    if polish:
        x = _polish(qp, x)
    return QuarticSolution(point=recover_attack(x, qp, fit), x_star=x, value=qp.value(x),
                           lower_bound=lower, certified=certified, order=N, ranks=ranks,
                           cut=r, tiebreak=eps, attempts=attempts)
