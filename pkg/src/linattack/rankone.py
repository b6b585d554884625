"""Rank-one feature-matrix attack: perturb X by c d^T with ||c|| <= 1, ||d|| <= eta.

With v = X^+ c, n = X^+^T d, w = (I - X X^+) c and gamma = 1 + d^T X^+ c,
the change of e^T beta is

    h(c, d) = (gamma k wy - |w|^2 k ny - |n|^2 ev wy - gamma ev ny)
              / (|n|^2 |w|^2 + gamma^2)

where k = e^T X^+ n, wy = w^T y, ev = e^T v and ny = n^T y. For fixed d (or
fixed c) both numerator and denominator are quadratics in the free block, so
each block update is a ratio-of-quadratics problem over a ball, solved
globally through its LMI dual and a trust-region recovery.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import matkit
from .datasets import make_rng
from .errors import NumericalFailure, UnboundedAttackError
from .pgd import grad_h
from .regress import RegressionFit
from .sdpcore import min_eig_affine, trust_region
from .tolerances import DEFAULT


def selector(m, i, sense="minimize"):
    """e = e_i to minimize coefficient i, -e_i to maximize it."""
    e = np.zeros(m)
    e[i] = 1.0 if sense == "minimize" else -1.0
    return e


@dataclass
class RankOneContext:
    fit: RegressionFit
    e: np.ndarray
    eta: float

    def __post_init__(self):
        f = self.fit
        self.e = np.asarray(self.e, float)
        self.Ae = f.gram_inv @ self.e          # X^+ X^+^T e
        self.p = f.pinv.T @ self.e             # X^+^T e, so ev = p^T c
        self.r = f.proj_residual @ f.y         # (I - X X^+) y, so wy = r^T c
        self.Um = f.svd.U[:, :f.m]

    @property
    def sigma_min(self):
        return self.fit.sigma_min

    def parts(self, c, d):
        f = self.fit
        v = f.pinv @ c
        n = f.pinv.T @ d
        w = c - f.X @ v
        return {"gamma": 1.0 + d @ v, "v": v, "n": n, "w": w}


@dataclass
class RankOnePerturbation:
    c: np.ndarray
    d: np.ndarray
    objective: float
    trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    seed: Optional[int] = None
    eta: float = 0.0

    @property
    def delta(self):
        return np.outer(self.c, self.d)


@dataclass
class RatioCoeffs:
    """h_num(x) = x^T A1 x + 2 b1^T x + l1 and h_den likewise.

    ``basis`` maps the (possibly reduced) variable back to the full vector.
    """
    A1: np.ndarray
    b1: np.ndarray
    l1: float
    A2: np.ndarray
    b2: np.ndarray
    l2: float
    basis: Optional[np.ndarray] = None

    def num(self, x):
        x = np.atleast_2d(x)
        return np.einsum("ij,jk,ik->i", x, self.A1, x) + 2 * x @ self.b1 + self.l1

    def den(self, x):
        x = np.atleast_2d(x)
        return np.einsum("ij,jk,ik->i", x, self.A2, x) + 2 * x @ self.b2 + self.l2

    def ratio(self, x):
        x = np.asarray(x, float)
        out = self.num(x) / self.den(x)
        return float(out[0]) if x.ndim == 1 else out

    def lifted(self):
        M1 = np.block([[self.A1, self.b1[:, None]], [self.b1[None, :], np.array([[self.l1]])]])
        M2 = np.block([[self.A2, self.b2[:, None]], [self.b2[None, :], np.array([[self.l2]])]])
        return M1, M2


@dataclass
class RatioSolution:
    x: np.ndarray
    value: float      # certified dual value alpha
    ratio: float      # ratio at x
    nu: float
    iterations: int = 0


def pinv_update(fit: RegressionFit, c, d, tol=None):
    """G with (X + c d^T)^+ = X^+ + G; returns (G, case number)."""
    tol = DEFAULT.case_split if tol is None else tol
    c = np.asarray(c, float)
    d = np.asarray(d, float)
    Xp = fit.pinv
    v = Xp @ c
    n = Xp.T @ d
    w = c - fit.X @ v
    gamma = 1.0 + d @ v
    nn, ww = n @ n, w @ w
    w_zero = np.sqrt(ww) <= tol * max(np.linalg.norm(c), np.finfo(float).tiny)
    g_zero = abs(gamma) <= tol
    Xn = Xp @ n
    if w_zero and not g_zero:
        return -np.outer(v, n) / gamma, 1
    if not w_zero and g_zero:
        return -np.outer(Xn, n) / nn - np.outer(v, w) / ww, 2
    if not w_zero:
        G = np.outer(Xn, w) / gamma
        G -= gamma / (nn * ww + gamma ** 2) * np.outer(ww / gamma * Xn + v, nn / gamma * w + n)
        return G, 3
    vv = v @ v
    G = (-np.outer(v, v) @ Xp / vv - np.outer(Xn, n) / nn
         + (v @ Xn) / (vv * nn) * np.outer(v, n))
    return G, 4


def objective_h(ctx: RankOneContext, c, d) -> float:
    f = ctx.fit
    c = np.asarray(c, float)
    d = np.asarray(d, float)
    v = f.pinv @ c
    gamma = 1.0 + d @ v
    k = ctx.Ae @ d
    ny = f.beta0 @ d
    nn = d @ f.gram_inv @ d
    ev = ctx.p @ c
    wy = ctx.r @ c
    W = c @ c - v @ (f.X.T @ c)   # c^T (I - X X^+) c
    W = max(W, 0.0)
    num = gamma * k * wy - W * k * ny - nn * ev * wy - gamma * ev * ny
    return float(num / (nn * W + gamma ** 2))


def objective_h_batch(ctx: RankOneContext, C, D) -> np.ndarray:
    """h over rows of C (K x n) and D (K x m)."""
    f = ctx.fit
    C = np.atleast_2d(C)
    D = np.atleast_2d(D)
    V = C @ f.pinv.T
    gamma = 1.0 + np.einsum("ij,ij->i", D, V)
    k = D @ ctx.Ae
    ny = D @ f.beta0
    nn = np.einsum("ij,jk,ik->i", D, f.gram_inv, D)
    ev = C @ ctx.p
    wy = C @ ctx.r
    W = np.maximum(np.einsum("ij,ij->i", C, C) - np.einsum("ij,ij->i", V, C @ f.X), 0.0)
    return (gamma * k * wy - W * k * ny - nn * ev * wy - gamma * ev * ny) / (nn * W + gamma ** 2)


def objective_refit(fit: RegressionFit, e, c, d) -> float:
    """e^T (beta_hat - beta0) by solving least squares on X + c d^T."""
    Xh = fit.X + np.outer(c, d)
    beta, *_ = np.linalg.lstsq(Xh, fit.y, rcond=None)
    return float(np.asarray(e) @ (beta - fit.beta0))


def _c_basis(ctx):
    """Orthonormal basis in which the c-subproblem is exact.

    Every c-dependent quantity is a function of U_m^T c, r^T c and
    c^T (I - X X^+) c, so c = U_m a + t r/|r| + s q loses nothing, with q any
    unit vector orthogonal to the first columns. Returns (basis, has_q).
    """
    cached = getattr(ctx, "_basis", None)
    if cached is not None:
        return cached
    cols = [ctx.Um]
    rn = np.linalg.norm(ctx.r)
    if rn > 1e-14 * max(1.0, np.linalg.norm(ctx.fit.y)):
        cols.append((ctx.r / rn)[:, None])
    Q = np.hstack(cols)
    q = matkit.orthonormal_complement_vector(Q)
    if q is not None:
        Q = np.hstack([Q, q[:, None]])
    ctx._basis = (Q, q is not None)
    return ctx._basis


def reduce_c(ctx, c):
    """Coordinates z with h(B z, d) = h(c, d) and |z| = |c|."""
    B, has_q = _c_basis(ctx)
    z = B.T @ c
    if has_q:
        head = B[:, :-1]
        rest = c - head @ z[:-1]
        z[-1] = np.linalg.norm(rest)
    return z


def ratio_coeffs(ctx: RankOneContext, fixed: str, value, reduce=True) -> RatioCoeffs:
    """Quadratic numerator/denominator in the free block.

    ``fixed='d'`` gives coefficients in c (reduced coordinates when
    ``reduce``); ``fixed='c'`` gives coefficients in d.
    """
    f = ctx.fit
    value = np.asarray(value, float)
    sym = lambda S: 0.5 * (S + S.T)
    if fixed == "d":
        d = value
        n = f.pinv.T @ d
        k = ctx.Ae @ d
        ny = f.beta0 @ d
        nn = n @ n
        r, p = ctx.r, ctx.p
        if reduce:
            B = _c_basis(ctx)[0]
            n, r, p = B.T @ n, B.T @ r, B.T @ p
            P = B.T @ f.proj_residual @ B
            P = sym(P)
        else:
            B = None
            P = f.proj_residual
        A1 = sym(k * np.outer(n, r) - k * ny * P - nn * np.outer(p, r) - ny * np.outer(n, p))
        b1 = 0.5 * (k * r - ny * p)
        A2 = sym(nn * P + np.outer(n, n))
        return RatioCoeffs(A1, b1, 0.0, A2, n.copy(), 1.0, B)
    if fixed == "c":
        c = value
        v = f.pinv @ c
        om = ctx.r @ c
        W = max(c @ c - v @ (f.X.T @ c), 0.0)
        ev = ctx.p @ c
        A, Ae, b0 = f.gram_inv, ctx.Ae, f.beta0
        A1 = sym(om * np.outer(v, Ae) - W * np.outer(Ae, b0) - ev * om * A - ev * np.outer(v, b0))
        b1 = 0.5 * (om * Ae - ev * b0)
        A2 = sym(W * A + np.outer(v, v))
        return RatioCoeffs(A1, b1, 0.0, A2, v, 1.0, None)
    raise ValueError("fixed must be 'c' or 'd'")


def _lmi_feasible(M1, M2, E, alpha, nu0, tol):
    """Is max_{nu >= 0} lambda_min(M1 - alpha M2 + nu E) >= -tol?

    lambda_min is concave in nu, so golden-section search is exact; the
    search exits as soon as a certificate is found.
    """
    M = M1 - alpha * M2
    g = lambda nu: min_eig_affine(M, [E], [nu])
    best_nu, best = nu0, g(nu0)
    if best >= -tol:
        return True, best_nu, best
    g0 = g(0.0)
    if g0 > best:
        best_nu, best = 0.0, g0
        if best >= -tol:
            return True, best_nu, best
    hi = max(1.0, 2.0 * nu0)
    ghi = g(hi)
    for _ in range(200):
        g2 = g(2.0 * hi)
        if g2 <= ghi:
            break
        hi, ghi = 2.0 * hi, g2
        if ghi >= -tol:
            return True, hi, ghi
    hi = 2.0 * hi
    lo = 0.0
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo + (1 - phi) * (hi - lo), lo + phi * (hi - lo)
    ga, gb = g(a), g(b)
    for _ in range(200):
        if max(ga, gb) >= -tol:
            nu = a if ga >= gb else b
            return True, nu, max(ga, gb)
        if ga < gb:
            lo, a, ga = a, b, gb
            b = lo + phi * (hi - lo)
            gb = g(b)
        else:
            hi, b, gb = b, a, ga
            a = lo + (1 - phi) * (hi - lo)
            ga = g(a)
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    nu = a if ga >= gb else b
    return max(ga, gb) >= -tol, nu, max(ga, gb)


def _dinkelbach(rc, radius, x, max_iter=100):
    for _ in range(max_iter):
        alpha = rc.ratio(x)
        tr = trust_region(rc.A1 - alpha * rc.A2, rc.b1 - alpha * rc.b2, radius)
        val = tr.value + rc.l1 - alpha * rc.l2
        scale = 1.0 + abs(alpha)
        if val >= -1e-15 * scale or rc.ratio(tr.x_star) >= alpha:
            break
        x = tr.x_star
    return x


def solve_ratio_subproblem(rc: RatioCoeffs, radius: float, x0=None, rel_tol=1e-12,
                           bracket=None) -> RatioSolution:
    """Minimize h_num/h_den over ||x|| <= radius.

    The optimal value is max alpha such that
        [A1 b1; b1^T l1] - alpha [A2 b2; b2^T l2] + nu diag(I, -radius^2) >= 0
    for some nu >= 0. A Dinkelbach pass from ``x0`` gives an attained upper
    bound; bisection on alpha with the LMI test closes the bracket from below;
    the minimizer comes from the trust-region problem at the final alpha.
    """
    dim = rc.b1.size
    x = np.zeros(dim) if x0 is None else np.asarray(x0, float)
    nx = np.linalg.norm(x)
    if nx > radius:
        x = x * (radius / nx)
    x = _dinkelbach(rc, radius, x)
    hi = rc.ratio(x)
    M1, M2 = rc.lifted()
    E = np.eye(dim + 1)
    E[dim, dim] = -radius ** 2
    scale = max(1.0, np.max(np.abs(M1)), abs(hi) * np.max(np.abs(M2)))
    tol = 1e-13 * scale

    def nu_hint(alpha):
        tr = trust_region(rc.A1 - alpha * rc.A2, rc.b1 - alpha * rc.b2, radius)
        return tr.multiplier

    delta = 1e-8 * (1.0 + abs(hi)) if bracket is None else float(bracket)
    lo = hi - delta
    for widen in range(40):
        ok, nu, _ = _lmi_feasible(M1, M2, E, lo, nu_hint(lo), tol)
        if ok:
            break
        delta *= 10.0
        lo = hi - delta
    else:
        raise NumericalFailure("could not bracket the ratio subproblem from below",
                               {"upper": hi, "last_lower": lo})
    nu_lo = nu
    its = 0
    top = hi
    while top - lo > rel_tol * (1.0 + abs(hi)) and its < 100:
        mid = 0.5 * (lo + top)
        ok, nu, _ = _lmi_feasible(M1, M2, E, mid, nu_hint(mid), tol)
        if ok:
            lo, nu_lo = mid, nu
        else:
            top = mid
        its += 1
    tr = trust_region(rc.A1 - lo * rc.A2, rc.b1 - lo * rc.b2, radius)
    cand = tr.x_star
    if rc.ratio(cand) > hi:
        cand = x
    return RatioSolution(x=cand, value=float(lo), ratio=rc.ratio(cand), nu=float(nu_lo), iterations=its)


def check_unbounded(fit: RegressionFit, eta: float):
    """None when eta < sigma_m, else the certificate (c, d) = (u_m, -sigma_m v_m)."""
    if eta < fit.sigma_min:
        return None
    m = fit.m
    return fit.svd.U[:, m - 1].copy(), -fit.sigma_min * fit.svd.V[:, m - 1]


def divergence_probe(fit: RegressionFit, e, frac=1e-4, eta=None):
    """Objective along the certificate direction near the pole gamma = 0.

    Evaluates h at (u_m, -t v_m) for t = (1 - frac) sigma_m and, when the
    budget allows, t = (1 + frac) sigma_m; returns the more negative value
    together with the baseline h at t = sigma_m / 2. Along this path
    h(t) = t K / (sigma_m^2 (1 - t / sigma_m)) for a data constant K.
    """
    ctx = RankOneContext(fit, e, eta or fit.sigma_min)
    s = fit.sigma_min
    m = fit.m
    u, v = fit.svd.U[:, m - 1], fit.svd.V[:, m - 1]
    base = objective_h(ctx, u, -0.5 * s * v)
    ts = [s * (1 - frac)]
    if eta is not None and eta >= s * (1 + frac):
        ts.append(s * (1 + frac))
    vals = [(objective_h(ctx, u, -t * v), t) for t in ts]
    h, t = min(vals)
    return {"t": t, "h": h, "baseline": base, "sides": vals}


def _ball_sample(rng, dim, radius):
    g = rng.standard_normal(dim)
    g /= np.linalg.norm(g)
    return radius * rng.random() ** (1.0 / dim) * g


def initial_point(fit, eta, seed):
    rng = make_rng(seed)
    return _ball_sample(rng, fit.n, 1.0), _ball_sample(rng, fit.m, eta)


def alternating_attack(fit: RegressionFit, e, eta: float, seed=0, tol=None, max_iter=None,
                       init=None, reduce=True) -> RankOnePerturbation:
    """Alternate exact c- and d-block minimizations of h from a random start.

    With ``reduce=False`` the c-step works with the full n-dimensional
    coefficients instead of the exact (m + 2)-dimensional reduction.
    """
    tol = DEFAULT.ao_tol if tol is None else tol
    max_iter = DEFAULT.ao_max_iter if max_iter is None else max_iter
    cert = check_unbounded(fit, eta)
    if cert is not None:
        raise UnboundedAttackError(
            f"eta = {eta:.6g} >= sigma_m = {fit.sigma_min:.6g}: objective unbounded below", cert)
    ctx = RankOneContext(fit, e, eta)
    c, d = initial_point(fit, eta, seed) if init is None else (np.array(init[0], float), np.array(init[1], float))
    h = objective_h(ctx, c, d)
    trace = [h]
    basis = _c_basis(ctx)[0] if reduce else None
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        rc = ratio_coeffs(ctx, "d", d, reduce=reduce)
        sol = solve_ratio_subproblem(rc, 1.0, reduce_c(ctx, c) if reduce else c)
        c_new = basis @ sol.x if reduce else sol.x
        h_new = objective_h(ctx, c_new, d)
        if h_new <= h:
            c, h = c_new, h_new
        rd = ratio_coeffs(ctx, "c", c)
        sol = solve_ratio_subproblem(rd, eta, d)
        h_new = objective_h(ctx, c, sol.x)
        if h_new <= h:
            d, h = sol.x, h_new
        trace.append(h)
        if abs(trace[-1] - trace[-2]) <= tol * (1.0 + abs(trace[-1])):
            converged = True
            break
    return RankOnePerturbation(c=c, d=d, objective=h, trace=trace, iterations=k,
                               converged=converged, seed=seed, eta=eta)


def criticality_residual(ctx: RankOneContext, c, d, samples=10_000, seed=0) -> float:
    """min over sampled feasible (c', d') of grad h . [(c' - c); (d' - d)]."""
    gc, gd = grad_h(ctx, c, d)
    rng = make_rng(seed)
    n, m = c.size, d.size
    Cs = rng.standard_normal((samples, n))
    Ds = rng.standard_normal((samples, m))
    Cs /= np.linalg.norm(Cs, axis=1, keepdims=True)
    Ds /= np.linalg.norm(Ds, axis=1, keepdims=True)
    # half on the spheres, half inside
    rc = np.where(np.arange(samples) % 2 == 0, 1.0, rng.random(samples) ** (1.0 / n))
    rd = np.where(np.arange(samples) % 2 == 0, 1.0, rng.random(samples) ** (1.0 / m))
    Cs *= rc[:, None]
    Ds *= (ctx.eta * rd)[:, None]
    vals = (Cs - c) @ gc + (Ds - d) @ gd
    return float(vals.min())


def criticality_residual_exact(ctx: RankOneContext, c, d) -> float:
    """Exact minimum of the same inner product over the product of balls."""
    gc, gd = grad_h(ctx, c, d)
    return float(-np.linalg.norm(gc) - gc @ c - ctx.eta * np.linalg.norm(gd) - gd @ d)
