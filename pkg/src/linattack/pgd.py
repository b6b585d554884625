"""Projected gradient descent over products of balls, with the analytic
gradients of both attack objectives."""
from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure

PRESETS = (1.0, 10.0, 100.0)


@dataclass(frozen=True)
class PgdConfig:
    """Stepsize a / (1 + t); stop on relative objective change <= tol once
    the iterate has also stopped moving (relative step <= sqrt(tol))."""
    a: float = 1.0
    max_iter: int = 10_000
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("stepsize scale a must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    def step(self, t):
        return self.a / (1.0 + t)


def project_ball(v, r):
    if r < 0:
        raise ValueError("radius must be nonnegative")
    v = np.asarray(v, float)
    nv = np.linalg.norm(v)
    if nv <= r:
        return v.copy()
    return v * (r / nv)


def pgd_minimize(f, grad, radii, x0, cfg: PgdConfig = PgdConfig()):
    """Minimize f over a product of balls.

    ``x0`` is a list of blocks (or one array), ``radii`` the matching ball
    radii, and ``grad`` returns the block gradients in the same layout.
    Returns (final iterate, objective trace).
    """
    single = isinstance(x0, np.ndarray)
    blocks = [np.asarray(x0, float)] if single else [np.asarray(b, float) for b in x0]
    radii = [radii] if np.isscalar(radii) else list(radii)
    if len(radii) != len(blocks):
        raise ValueError("one radius per block is required")
    blocks = [project_ball(b, r) for b, r in zip(blocks, radii)]
    args = (lambda bs: bs[0]) if single else (lambda bs: bs)
    gradf = (lambda bs: [grad(bs[0])]) if single else grad
    fv = float(f(args(blocks)))
    trace = [fv]
    for t in range(cfg.max_iter):
        g = gradf(blocks)
        if any(not np.all(np.isfinite(gk)) for gk in g):
            raise NumericalFailure("non-finite gradient in projected descent",
                                   {"iteration": t, "iterate": [b.copy() for b in blocks]})
        step = cfg.step(t)
        prev = blocks
        blocks = [project_ball(b - step * gk, r) for b, gk, r in zip(blocks, g, radii)]
        new = float(f(args(blocks)))
        trace.append(new)
        # a jump between points of equal value (x -> -x on an even f) is not convergence
        moved = max(np.linalg.norm(b - q) / (1.0 + np.linalg.norm(b)) for b, q in zip(blocks, prev))
        if abs(new - fv) <= cfg.tol * (1.0 + abs(new)) and moved <= np.sqrt(cfg.tol):
            break
        fv = new
    return args(blocks), trace


def grad_quartic(qp, x):
    """Gradient of 1/2 (Hq x e^T x - b)^T Lambda (Hq x e^T x - b)."""
    x = np.asarray(x, float)
    r = (qp.Hq @ x) * (qp.e @ x) - qp.b
    wr = qp.Lambda * r
    return (qp.e @ x) * (qp.Hq.T @ wr) + (qp.Hq @ x @ wr) * qp.e


def grad_h(ctx, c, d):
    """(dh/dc, dh/dd) for the rank-one objective h = N / D."""
    f = ctx.fit
    c = np.asarray(c, float)
    d = np.asarray(d, float)
    v = f.pinv @ c
    n = f.pinv.T @ d
    Pc = c - f.X @ v
    Ad = f.gram_inv @ d
    gamma = 1.0 + d @ v
    k = ctx.Ae @ d
    ny = f.beta0 @ d
    nn = d @ Ad
    ev = ctx.p @ c
    wy = ctx.r @ c
    W = c @ Pc
    r, p, Ae, b0 = ctx.r, ctx.p, ctx.Ae, f.beta0
    N = gamma * k * wy - W * k * ny - nn * ev * wy - gamma * ev * ny
    D = nn * W + gamma ** 2
    dNc = n * (k * wy - ev * ny) + gamma * k * r - 2 * k * ny * Pc - nn * (wy * p + ev * r) - gamma * ny * p
    dDc = 2 * nn * Pc + 2 * gamma * n
    dNd = v * (k * wy - ev * ny) + gamma * wy * Ae - W * (ny * Ae + k * b0) - 2 * ev * wy * Ad - gamma * ev * b0
    dDd = 2 * W * Ad + 2 * gamma * v
    return (dNc * D - N * dDc) / D ** 2, (dNd * D - N * dDd) / D ** 2


def finite_difference(f, x, step=None):
    """Central differences with step 1e-5 (1 + |x|)."""
    x = np.asarray(x, float)
    h = 1e-5 * (1.0 + np.linalg.norm(x)) if step is None else step
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def gradient_error(f, grad, x, step=None):
    """Relative error |g_fd - g| / max(1, |g|)."""
    g = np.asarray(grad(x), float)
    fd = finite_difference(f, x, step)
    return float(np.linalg.norm(fd - g) / max(1.0, np.linalg.norm(g)))
