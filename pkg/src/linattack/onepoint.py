"""Closed-form optimal poisoning point against a single coefficient.

The bilevel problem (append one sample of energy at most ``eta``, then
minimize or maximize coefficient ``i`` of the refit) reduces to a ratio of
quadratics over a ball. After the homogenizing change of variables and
whitening by D^{-1/2}, the optimum is read off the single negative (or
positive) eigenvalue of a matrix whose spectrum is known in closed form.
"""
from dataclasses import dataclass

import numpy as np

from . import matkit
from .errors import DegenerateTargetError, InfeasibleRecoveryError
from .regress import PoisonPoint, RegressionFit, refit_add_point


@dataclass(frozen=True)
class WhitenedProblem:
    G: np.ndarray
    g: float
    c: np.ndarray
    h: np.ndarray
    H: np.ndarray
    D: np.ndarray
    eta: float
    index: int
    a: np.ndarray


@dataclass(frozen=True)
class ExtremePair:
    xi_pos: float
    xi_neg: float
    nu_pos: np.ndarray
    nu_neg: np.ndarray


def _check_index(fit, i):
    if not 0 <= i < fit.m:
        raise IndexError(f"coefficient index {i} out of range for m={fit.m}")


def build_whitened(fit: RegressionFit, i: int, eta: float) -> WhitenedProblem:
    _check_index(fit, i)
    if not eta > 0:
        raise ValueError("eta must be positive")
    m = fit.m
    A, beta0 = fit.gram_inv, fit.beta0
    a = A[:, i].copy()
    H = np.zeros((m + 1, m + 1))
    H[:m, :m] = -np.outer(a, beta0) - np.outer(beta0, a)
    H[:m, m] = a
    H[m, :m] = a
    A2 = np.zeros((m + 1, m + 1))
    A2[:m, :m] = A
    D = 2.0 * (np.eye(m + 1) + eta ** 2 * A2)
    G = matkit.inv_sqrt(np.eye(m) + eta ** 2 * A) / np.sqrt(2.0)
    g = 1.0 / np.sqrt(2.0)
    return WhitenedProblem(G=G, g=g, c=G @ a, h=G @ beta0, H=H, D=D,
                           eta=float(eta), index=i, a=a)


def whitened_matrix(wp: WhitenedProblem) -> np.ndarray:
    """D^{-1/2} H D^{-1/2}, formed explicitly."""
    m = wp.c.size
    Dmh = np.zeros((m + 1, m + 1))
    Dmh[:m, :m] = wp.G
    Dmh[m, m] = wp.g
    K = Dmh @ wp.H @ Dmh
    return 0.5 * (K + K.T)


def extreme_eigs(wp: WhitenedProblem) -> ExtremePair:
    c, h, g = wp.c, wp.h, wp.g
    cc = float(c @ c)
    if cc == 0.0:
        raise DegenerateTargetError("target column of the inverse Gram matrix is zero")
    ch = float(c @ h)
    root = np.sqrt(cc) * np.sqrt(g * g + float(h @ h))
    pairs = []
    for xi in (-ch + root, -ch - root):
        u = h - (ch + xi) / cc * c
        # the last component simplifies to (g / xi) * c^T u = -g
        nu = np.concatenate([u, [-g]])
        pairs.append((xi, nu / np.linalg.norm(nu)))
    (xi_pos, nu_pos), (xi_neg, nu_neg) = pairs
    return ExtremePair(xi_pos=float(xi_pos), xi_neg=float(xi_neg), nu_pos=nu_pos, nu_neg=nu_neg)


def ratio_objective(fit: RegressionFit, i: int, u) -> np.ndarray:
    """Change in coefficient i for stacked points u = [x0, y0] (rows)."""
    u = np.atleast_2d(np.asarray(u, float))
    x0, y0 = u[:, :-1], u[:, -1]
    a = fit.gram_inv[:, i]
    den = 1.0 + np.einsum("ij,jk,ik->i", x0, fit.gram_inv, x0)
    return (x0 @ a) * (y0 - x0 @ fit.beta0) / den


def _point_from_z(fit, z, i, value, meta):
    m = fit.m
    zx = z[:m]
    s2 = 1.0 - zx @ fit.gram_inv @ zx
    if not s2 > 0:
        raise InfeasibleRecoveryError(f"homogenizing scalar s^2 = {s2:.3e} is not positive")
    s = np.sqrt(s2)
    p = PoisonPoint(x0=zx / s, y0=float(z[m] / s), meta=meta)
    p.predicted_beta = refit_add_point(fit, p)
    p.predicted_value = float(value)
    return p


def attack_coefficient(fit: RegressionFit, i: int, eta: float, sense: str = "minimize") -> PoisonPoint:
    """Optimal single poisoning point that minimizes or maximizes coefficient i."""
    if sense not in ("minimize", "maximize"):
        raise ValueError("sense must be 'minimize' or 'maximize'")
    wp = build_whitened(fit, i, eta)
    ep = extreme_eigs(wp)
    xi, nu = (ep.xi_neg, ep.nu_neg) if sense == "minimize" else (ep.xi_pos, ep.nu_pos)
    m = fit.m
    Dmh_nu = np.concatenate([wp.G @ nu[:m], [wp.g * nu[m]]])
    z = np.sqrt(2.0) * eta * Dmh_nu
    value = eta ** 2 * xi + fit.beta0[i]
    meta = {"sense": sense, "eta": float(eta), "index": i, "xi": xi,
            "multiplier": -xi if sense == "minimize" else xi, "z": z}
    return _point_from_z(fit, z, i, value, meta)


def kkt_residual(fit: RegressionFit, point: PoisonPoint):
    """(|(H - xi D) z|_inf / |H|_max, |z^T D z / 2 - eta^2| / eta^2) for a
    point returned by attack_coefficient."""
    meta = point.meta
    wp = build_whitened(fit, meta["index"], meta["eta"])
    z = meta["z"]
    r = (wp.H - meta["xi"] * wp.D) @ z
    stat = float(np.max(np.abs(r)) / np.max(np.abs(wp.H)))
    act = float(abs(0.5 * z @ wp.D @ z - wp.eta ** 2) / wp.eta ** 2)
    return stat, act


def closed_form_value(fit: RegressionFit, i: int, eta: float, sense: str = "minimize") -> float:
    ep = extreme_eigs(build_whitened(fit, i, eta))
    xi = ep.xi_neg if sense == "minimize" else ep.xi_pos
    return float(eta ** 2 * xi + fit.beta0[i])


def _zeroing_point(fit, i, eta, sense, iters=200):
    """Bisection on the budget for the point driving coefficient i to zero."""
    lo, hi = 0.0, float(eta)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        v = closed_form_value(fit, i, mid, sense)
        crossed = v <= 0 if sense == "minimize" else v >= 0
        if crossed:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return attack_coefficient(fit, i, hi, sense), hi


def solve_abs_objective(fit: RegressionFit, i: int, eta: float, sense: str = "shrink",
                        exact_zero: bool = False) -> PoisonPoint:
    """Shrink or grow |coefficient i| with one poisoning point.

    ``shrink`` pushes the coefficient toward zero: if the budget is enough to
    cross zero, the default returns the unconstrained extreme point (whose
    coefficient has flipped sign); ``exact_zero=True`` instead bisects on the
    budget for a point that lands on zero. ``grow`` returns whichever extreme
    has the larger magnitude.
    """
    b = fit.beta0[i]
    lo_pt = attack_coefficient(fit, i, eta, "minimize")
    hi_pt = attack_coefficient(fit, i, eta, "maximize")
    if sense == "grow":
        pick = lo_pt if abs(lo_pt.predicted_value) >= abs(hi_pt.predicted_value) else hi_pt
        pick.meta.update(objective="grow", abs_value=abs(pick.predicted_value))
        return pick
    if sense != "shrink":
        raise ValueError("sense must be 'shrink' or 'grow'")
    toward, direction = (lo_pt, "minimize") if b >= 0 else (hi_pt, "maximize")
    crosses = toward.predicted_value < 0 if b >= 0 else toward.predicted_value > 0
    if not crosses:
        toward.meta.update(objective="shrink", crosses_zero=False, abs_value=abs(toward.predicted_value))
        return toward
    if exact_zero:
        pt, used = _zeroing_point(fit, i, eta, direction)
        pt.meta.update(objective="shrink", crosses_zero=True, exact_zero=True, eta_used=used,
                       abs_value=0.0)
        pt.predicted_value = float(pt.predicted_beta[i])
        return pt
    toward.meta.update(objective="shrink", crosses_zero=True, exact_zero=False,
                       abs_value=abs(toward.predicted_value))
    return toward
