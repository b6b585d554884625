import numpy as np
import pytest

from linattack import matkit, onepoint
from linattack.datasets import synthetic_regression
from linattack.errors import DegenerateTargetError
from linattack.regress import Dataset, PoisonPoint, fit_ols, refit_add_point, refit_add_points

from oracles import ball_point, sobol_ball


def test_small_budget_limits(istanbul_fit):
    wp = onepoint.build_whitened(istanbul_fit, 3, 1e-9)
    assert np.allclose(wp.G, np.eye(istanbul_fit.m) / np.sqrt(2))
    assert np.allclose(wp.D, 2 * np.eye(istanbul_fit.m + 1))
    p = onepoint.attack_coefficient(istanbul_fit, 3, 1e-9)
    assert np.linalg.norm(p.x0) < 1e-8 and abs(p.y0) < 1e-8
    assert p.predicted_value == pytest.approx(istanbul_fit.beta0[3], abs=1e-12)


def test_orthogonal_design():
    # X^T X = I, so A = I; choose y orthogonal to X so beta0 = 0
    X = np.vstack([np.eye(3), np.zeros((2, 3))])
    y = np.array([0, 0, 0, 1.0, -1.0])
    fit = fit_ols(Dataset(X, y))
    wp = onepoint.build_whitened(fit, 0, 0.7)
    assert np.allclose(wp.h, 0)
    assert np.allclose(wp.c[1:], 0) and wp.c[0] > 0
    assert np.trace(wp.H) == 0.0
    H = wp.H.copy()
    H[0, 3] = H[3, 0] = 0.0
    assert np.allclose(H, 0)


def test_invariants_istanbul(istanbul_fit):
    wp = onepoint.build_whitened(istanbul_fit, 3, 0.2)
    assert np.allclose(wp.D, wp.D.T) and np.all(np.linalg.eigvalsh(wp.D) > 0)
    assert np.allclose(wp.H, wp.H.T)
    # the diagonal is -2 a_j beta0_j, so the trace is -2 a^T beta0 (zero only when a is orthogonal to beta0)
    assert np.trace(wp.H) == pytest.approx(-2 * wp.a @ istanbul_fit.beta0, rel=1e-12)
    assert np.linalg.norm(wp.c) > 0


def test_validation(istanbul_fit):
    with pytest.raises(IndexError):
        onepoint.build_whitened(istanbul_fit, istanbul_fit.m, 0.2)
    with pytest.raises(ValueError):
        onepoint.build_whitened(istanbul_fit, 0, 0.0)


def test_degenerate_target_guard(istanbul_fit):
    wp = onepoint.build_whitened(istanbul_fit, 0, 0.2)
    zero = type(wp)(**{**wp.__dict__, "c": np.zeros_like(wp.c)})
    with pytest.raises(DegenerateTargetError):
        onepoint.extreme_eigs(zero)


def test_spectrum_istanbul(istanbul_fit):
    wp = onepoint.build_whitened(istanbul_fit, 3, 0.2)
    K = onepoint.whitened_matrix(wp)
    w = matkit.sym_eig(K).values
    tol = 1e-8 * np.max(np.abs(K))
    assert np.sum(w > tol) == 1 and np.sum(w < -tol) == 1
    assert np.sum(np.abs(w) <= tol) == istanbul_fit.m - 1
    ep = onepoint.extreme_eigs(wp)
    assert ep.xi_pos == pytest.approx(w[0], rel=1e-10)
    assert ep.xi_neg == pytest.approx(w[-1], rel=1e-10)
    for xi, nu in ((ep.xi_pos, ep.nu_pos), (ep.xi_neg, ep.nu_neg)):
        assert np.linalg.norm(nu) == pytest.approx(1.0)
        assert np.max(np.abs(K @ nu - xi * nu)) <= 1e-8


def test_symmetric_spectrum_when_c_orthogonal_to_h(istanbul_fit):
    wp = onepoint.build_whitened(istanbul_fit, 2, 0.3)
    h = wp.h - (wp.c @ wp.h) / (wp.c @ wp.c) * wp.c
    ep = onepoint.extreme_eigs(type(wp)(**{**wp.__dict__, "h": h}))
    expected = np.linalg.norm(wp.c) * np.sqrt(wp.g ** 2 + h @ h)
    assert ep.xi_pos == pytest.approx(expected) and ep.xi_neg == pytest.approx(-expected)


def test_one_dimensional_toy():
    fit = fit_ols(Dataset(np.array([[1.0], [1.0]]), np.array([1.0, 1.0])))
    wp = onepoint.build_whitened(fit, 0, 1.0)
    e = matkit.sym_eig(onepoint.whitened_matrix(wp))
    ep = onepoint.extreme_eigs(wp)
    assert ep.xi_pos == pytest.approx(e.values[0])
    assert ep.xi_neg == pytest.approx(e.values[-1])
    assert abs(abs(ep.nu_neg @ e.vectors[:, -1]) - 1) < 1e-12


@pytest.mark.parametrize("sense", ["minimize", "maximize"])
def test_point_reproduces_prediction(istanbul_fit, sense):
    for i in range(istanbul_fit.m):
        p = onepoint.attack_coefficient(istanbul_fit, i, 0.2, sense)
        assert refit_add_point(istanbul_fit, p)[i] == pytest.approx(p.predicted_value, abs=1e-7)
        assert p.energy == pytest.approx(0.2, rel=1e-8)
        stat, act = onepoint.kkt_residual(istanbul_fit, p)
        assert stat <= 1e-7 and act <= 1e-8


def test_sense_ordering(istanbul_fit):
    for eta in (0.05, 0.2, 1.0, 5.0):
        lo = onepoint.closed_form_value(istanbul_fit, 4, eta, "minimize")
        hi = onepoint.closed_form_value(istanbul_fit, 4, eta, "maximize")
        assert lo <= istanbul_fit.beta0[4] <= hi


def test_sign_of_s_is_immaterial(istanbul_fit):
    p = onepoint.attack_coefficient(istanbul_fit, 3, 0.2)
    flipped = PoisonPoint(-p.x0, -p.y0)
    assert np.allclose(refit_add_point(istanbul_fit, flipped), p.predicted_beta, atol=1e-14)


def test_ratio_dominance(istanbul_fit, rng):
    eta = 0.2
    xi = onepoint.extreme_eigs(onepoint.build_whitened(istanbul_fit, 3, eta)).xi_neg
    U = np.array([ball_point(rng, istanbul_fit.m + 1, eta) for _ in range(10_000)])
    assert np.min(onepoint.ratio_objective(istanbul_fit, 3, U)) >= eta ** 2 * xi - 1e-9


def test_brute_force_ball_search():
    fit = fit_ols(synthetic_regression(n=40, m=2, seed=7))
    eta = 0.5
    P = sobol_ball(20, 3, eta, seed=1)
    B = refit_add_points(fit, P[:, :2], P[:, 2])
    for i in range(2):
        v = onepoint.attack_coefficient(fit, i, eta).predicted_value
        brute = np.min(B[:, i])
        assert v <= brute + 1e-12
        assert brute - v <= 1e-3


def test_abs_objective_decisions():
    fit = fit_ols(synthetic_regression(n=40, m=2, seed=7))
    P = sobol_ball(18, 3, 1.0, seed=2)
    for eta in (0.05, 0.3, 1.0):
        B = refit_add_points(fit, eta * P[:, :2], eta * P[:, 2])
        for i in range(2):
            grow = onepoint.solve_abs_objective(fit, i, eta, "grow")
            assert abs(grow.predicted_value) >= np.max(np.abs(B[:, i])) - 1e-12
            assert np.max(np.abs(B[:, i])) >= abs(grow.predicted_value) - 1e-2
            shrink = onepoint.solve_abs_objective(fit, i, eta, "shrink", exact_zero=True)
            assert shrink.meta["abs_value"] <= np.min(np.abs(B[:, i])) + 1e-9
            if shrink.meta["crosses_zero"]:
                assert abs(shrink.predicted_beta[i]) <= 1e-9
                assert shrink.energy <= eta * (1 + 1e-9)


def test_shrink_monotone_case(istanbul_fit):
    i = int(np.argmax(istanbul_fit.beta0))
    assert istanbul_fit.beta0[i] > 0
    p = onepoint.solve_abs_objective(istanbul_fit, i, 1e-3, "shrink")
    assert p.meta["crosses_zero"] is False and p.meta["sense"] == "minimize"
    g = onepoint.solve_abs_objective(istanbul_fit, i, 0.2, "grow")
    lo = onepoint.closed_form_value(istanbul_fit, i, 0.2, "minimize")
    hi = onepoint.closed_form_value(istanbul_fit, i, 0.2, "maximize")
    assert abs(g.predicted_value) == pytest.approx(max(abs(lo), abs(hi)))
