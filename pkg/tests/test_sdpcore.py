import numpy as np
import pytest

from linattack import sdpcore
from linattack.datasets import make_rng
from linattack.errors import DimensionError
from linattack.sdpcore import LmiBlock, SdpProblem

from oracles import barrier_sdp, sobol_ball


def block(F0, Fs):
    F0 = np.asarray(F0, float)
    return LmiBlock(F0.shape[0], F0, np.column_stack([np.asarray(F, float).reshape(-1) for F in Fs]))


def sym(rng, k):
    a = rng.standard_normal((k, k))
    return 0.5 * (a + a.T)


def check_solution(prob, sol):
    assert sol.status == "optimal"
    assert sol.duality_gap <= 1e-8 * (1 + abs(sol.value))
    assert prob.min_block_eig(sol.y_star) >= -1e-8


def test_two_by_two_boundary():
    prob = SdpProblem(1, [block(np.eye(2), [[[0, 1], [1, 0]]])], [1.0])
    sol = sdpcore.solve_sdp(prob)
    check_solution(prob, sol)
    assert sol.value == pytest.approx(-1.0, abs=1e-7)


def test_trace_with_pinned_corner():
    # Y = [[1, y1], [y1, y2]], minimize tr(Y) = 1 + y2
    prob = SdpProblem(2, [block([[1, 0], [0, 0]], [[[0, 1], [1, 0]], [[0, 0], [0, 1]]])],
                      [0.0, 1.0], c0=1.0)
    sol = sdpcore.solve_sdp(prob)
    check_solution(prob, sol)
    assert sol.value == pytest.approx(1.0, abs=1e-7)


def random_sdp(seed, dim=10, sizes=(6, 4)):
    rng = make_rng(seed)
    F0s, Fs = [], []
    c = np.zeros(dim)
    for s in sizes:
        F0s.append(np.eye(s) + 0.2 * sym(rng, s))
        FF = [sym(rng, s) for _ in range(dim)]
        Fs.append(FF)
        G = rng.standard_normal((s, s))
        X0 = G @ G.T / s + 0.1 * np.eye(s)
        # c in the image of a positive definite X0 keeps the problem bounded
        c += np.array([np.sum(F * X0) for F in FF])
    return F0s, Fs, c


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_random_sdp_against_barrier_oracle(seed):
    F0s, Fs, c = random_sdp(seed)
    assert all(np.linalg.eigvalsh(F0)[0] > 0 for F0 in F0s)
    prob = SdpProblem(10, [block(F0, FF) for F0, FF in zip(F0s, Fs)], c)
    sol = sdpcore.solve_sdp(prob)
    check_solution(prob, sol)
    _, ref = barrier_sdp(F0s, Fs, c, np.zeros(10))
    assert abs(sol.value - ref) <= 1e-4
    assert sol.value == pytest.approx(ref, abs=1e-6)


@pytest.mark.parametrize("seed", [4, 5])
def test_weak_duality_along_the_path(seed):
    F0s, Fs, c = random_sdp(seed)
    prob = SdpProblem(10, [block(F0, FF) for F0, FF in zip(F0s, Fs)], c)
    sol = sdpcore.solve_sdp(prob)
    # history holds (standard-form primal, its dual, gap, pinf, dinf); the
    # y-problem value is minus the latter, its lower bound minus the former
    for pobj, dobj, _, pinf, dinf in sol.history:
        if pinf <= 1e-7 and dinf <= 1e-7:
            assert -dobj >= -pobj - 1e-7
    assert sol.value >= sol.dual_value - 1e-7


def test_dimension_checks():
    with pytest.raises(DimensionError):
        SdpProblem(2, [block(np.eye(2), [np.eye(2)])], [1.0, 0.0])
    with pytest.raises(DimensionError):
        LmiBlock(2, np.eye(2), np.zeros((3, 1)))


def tr_certificate(A, b, radius, res):
    x, mu = res.x_star, res.multiplier
    scale = 1 + np.max(np.abs(A)) + np.max(np.abs(b))
    assert np.linalg.norm(x) <= radius * (1 + 1e-10)
    assert np.max(np.abs((A + mu * np.eye(len(b))) @ x + b)) <= 1e-8 * scale
    assert mu >= 0 and abs(mu * (radius - np.linalg.norm(x))) <= 1e-8 * scale
    assert np.linalg.eigvalsh(A + mu * np.eye(len(b)))[0] >= -1e-8 * scale


def test_trust_region_trivial_and_hard_case():
    r = sdpcore.trust_region(np.eye(3), np.zeros(3), 1.0)
    assert np.allclose(r.x_star, 0) and r.value == 0.0
    A = np.diag([-1.0, 1.0])
    r = sdpcore.trust_region(A, np.zeros(2), 1.0)
    assert r.value == pytest.approx(-1.0)
    assert np.allclose(np.abs(r.x_star), [1.0, 0.0])
    assert r.hard_case
    tr_certificate(A, np.zeros(2), 1.0, r)
    with pytest.raises(ValueError):
        sdpcore.trust_region(A, np.zeros(2), 0.0)


def test_trust_region_kkt_thousand_instances():
    rng = make_rng(2024)
    for k in range(1000):
        n = 1 + k % 9
        A = sym(rng, n) * rng.uniform(0.1, 10)
        b = rng.standard_normal(n) * (rng.uniform(0, 3) if k % 10 else 0.0)
        radius = rng.uniform(0.05, 5)
        tr_certificate(A, b, radius, sdpcore.trust_region(A, b, radius))


def project_ball(x, r):
    nx = np.linalg.norm(x)
    return x if nx <= r else x * (r / nx)


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_trust_region_against_sampling_oracle(seed):
    rng = make_rng(seed)
    A, b, radius = sym(rng, 8), rng.standard_normal(8), 1.0
    res = sdpcore.trust_region(A, b, radius)
    P = sobol_ball(20, 8, radius, seed=seed)
    vals = np.einsum("ij,jk,ik->i", P, A, P) + 2 * P @ b
    sampled = float(np.min(vals))
    assert res.value <= sampled + 1e-12
    # 2^20 samples cannot resolve 8 dimensions to 1e-6, so the sampled
    # optimum is polished by projected gradient from the best samples
    L = 2 * np.max(np.abs(np.linalg.eigvalsh(A)))
    refined = sampled
    for x in P[np.argsort(vals)[:5]]:
        for _ in range(20000):
            x = project_ball(x - (2 * A @ x + 2 * b) / L, radius)
        refined = min(refined, float(x @ A @ x + 2 * b @ x))
    assert res.value <= refined + 1e-12
    assert refined - res.value <= 1e-6


def test_min_eig_affine():
    assert sdpcore.min_eig_affine(np.eye(3)) == pytest.approx(1.0)
    assert sdpcore.min_eig_affine(np.zeros((2, 2)), [np.eye(2)], [-2.0]) == pytest.approx(-2.0)
    with pytest.raises(DimensionError):
        sdpcore.min_eig_affine(np.eye(2), [np.eye(3)], [1.0])
    with pytest.raises(DimensionError):
        sdpcore.min_eig_affine(np.eye(2), [np.eye(2)], [1.0, 2.0])


def test_min_eig_affine_concave(rng):
    M0, M1, M2 = sym(rng, 6), sym(rng, 6), sym(rng, 6)
    f = lambda t: sdpcore.min_eig_affine(M0, [M1, M2], t)
    for _ in range(200):
        s, t = rng.standard_normal(2) * 3, rng.standard_normal(2) * 3
        assert f(0.5 * (s + t)) >= min(f(s), f(t)) - 1e-12
        assert f(0.5 * (s + t)) >= 0.5 * (f(s) + f(t)) - 1e-12
