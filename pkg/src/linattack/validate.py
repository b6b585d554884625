"""Self-checks run by ``linattack validate`` before benchmarks."""
import numpy as np

from . import onepoint, pgd, polyatk, rankone
from .datasets import make_rng, synthetic_istanbul
from .regress import PoisonPoint, fit_ols, refit_add_point, refit_direct


def _ball(rng, dim, r):
    g = rng.standard_normal(dim)
    return r * rng.random() ** (1.0 / dim) * g / np.linalg.norm(g)


def run_checks(seed=0, points=20):
    """List of (name, passed, detail)."""
    data = synthetic_istanbul()
    fit = fit_ols(data)
    rng = make_rng(seed)
    out = []

    worst = 0.0
    for _ in range(points):
        p = PoisonPoint(rng.standard_normal(fit.m), float(rng.standard_normal()))
        a, b = refit_add_point(fit, p), refit_direct(data, p)
        worst = max(worst, np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))
    out.append(("refit identity", worst <= 1e-8, f"max rel diff {worst:.2e}"))

    eta = 0.9 * fit.sigma_min
    worst = 0.0
    for _ in range(points):
        c, d = _ball(rng, fit.n, 1.0), _ball(rng, fit.m, eta)
        G, _ = rankone.pinv_update(fit, c, d)
        worst = max(worst, np.max(np.abs(fit.pinv + G - np.linalg.pinv(fit.X + np.outer(c, d)))))
    out.append(("pseudo-inverse update", worst <= 1e-7, f"max abs diff {worst:.2e}"))

    ctx = rankone.RankOneContext(fit, rankone.selector(fit.m, 3), eta)
    worst = 0.0
    for _ in range(points):
        c, d = _ball(rng, fit.n, 1.0), _ball(rng, fit.m, eta)
        gc, gd = pgd.grad_h(ctx, c, d)
        g = np.concatenate([gc, gd])
        fd = pgd.finite_difference(lambda v: rankone.objective_h(ctx, v[:fit.n], v[fit.n:]),
                                   np.concatenate([c, d]))
        worst = max(worst, np.linalg.norm(fd - g) / max(1.0, np.linalg.norm(g)))
    out.append(("gradient of h", worst <= 1e-5, f"max rel err {worst:.2e}"))

    qp = polyatk.build_quartic(fit, 3, 1.0, -1.0)
    worst = 0.0
    for _ in range(points):
        x = _ball(rng, qp.dim, qp.eta)
        worst = max(worst, pgd.gradient_error(qp.value, lambda v: pgd.grad_quartic(qp, v), x))
    out.append(("gradient of quartic", worst <= 1e-5, f"max rel err {worst:.2e}"))

    worst = 0.0
    for i in range(fit.m):
        for sense in ("minimize", "maximize"):
            p = onepoint.attack_coefficient(fit, i, 0.2, sense)
            worst = max(worst, onepoint.kkt_residual(fit, p)[0])
    out.append(("closed-form KKT", worst <= 1e-7, f"max residual {worst:.2e}"))
    return out
