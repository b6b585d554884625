"""Moment relaxations of polynomial programs.

Polynomials are dicts mapping exponent tuples to coefficients. Monomials are
ordered graded-lexicographically, so for two variables the degree-2 basis is
1, x1, x2, x1^2, x1 x2, x2^2.

Plain-text polynomial format (used by test fixtures)::

    # comment lines and blank lines are ignored
    <coeff> <e1> <e2> ... <en>

one monomial per line; repeated exponents are summed.
"""
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, IncompleteMomentError, OrderTooLowError
from .sdpcore import LmiBlock, SdpProblem, SdpSolution, solve_sdp
from .tolerances import DEFAULT

Exponent = Tuple[int, ...]
Polynomial = Dict[Exponent, float]


@lru_cache(maxsize=None)
def _basis(n, deg):
    out = []
    for d in range(deg + 1):
        for combo in combinations_with_replacement(range(n), d):
            e = [0] * n
            for j in combo:
                e[j] += 1
            out.append(tuple(e))
    return tuple(out)


def monomial_basis(n: int, deg: int) -> List[Exponent]:
    if n < 1 or deg < 0:
        raise ValueError("need n >= 1 and deg >= 0")
    return list(_basis(n, deg))


def basis_size(n, deg):
    return math.comb(n + deg, deg)


def _add(a, b):
    return tuple(i + j for i, j in zip(a, b))


def poly_degree(p: Polynomial) -> int:
    return max((sum(a) for a, c in p.items() if c != 0), default=0)


def poly_clean(p, tol=0.0):
    return {a: c for a, c in p.items() if abs(c) > tol}


def poly_add(p, q, scale=1.0):
    out = dict(p)
    for a, c in q.items():
        out[a] = out.get(a, 0.0) + scale * c
    return out


def poly_mul(p, q):
    out = {}
    for a, ca in p.items():
        for b, cb in q.items():
            k = _add(a, b)
            out[k] = out.get(k, 0.0) + ca * cb
    return out


def poly_scale_vars(p, s):
    """p(s * u) as a polynomial in u."""
    return {a: c * s ** sum(a) for a, c in p.items()}


def poly_eval(p: Polynomial, X) -> np.ndarray:
    """Evaluate at one point (1-d) or many points (rows of a 2-d array)."""
    X = np.asarray(X, float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    exps = np.array(list(p.keys()), dtype=int).reshape(len(p), X.shape[1])
    coefs = np.array(list(p.values()), float)
    vals = np.prod(X[:, None, :] ** exps[None, :, :], axis=2) @ coefs
    return float(vals[0]) if single else vals


@dataclass
class PolynomialProgram:
    """minimize objective(x) subject to g(x) >= 0 for each g in constraints."""
    num_vars: int
    objective: Polynomial
    constraints: List[Polynomial] = field(default_factory=list)

    def __post_init__(self):
        if not self.objective:
            raise ValueError("objective must be nonempty")
        for poly in [self.objective] + list(self.constraints):
            for a in poly:
                if len(a) != self.num_vars:
                    raise DimensionError(f"exponent {a} does not have {self.num_vars} entries")

    @property
    def degrees(self):
        return poly_degree(self.objective), [poly_degree(g) for g in self.constraints]

    def half_degrees(self):
        return [math.ceil(poly_degree(g) / 2) for g in self.constraints]

    def evaluate(self, X):
        return poly_eval(self.objective, X)

    def feasible(self, X, tol=0.0):
        X = np.atleast_2d(np.asarray(X, float))
        ok = np.ones(X.shape[0], bool)
        for g in self.constraints:
            ok &= poly_eval(g, X).reshape(-1) >= -tol
        return ok


@dataclass
class MomentVector:
    num_vars: int
    order: int
    entries: Dict[Exponent, object]

    def __getitem__(self, alpha):
        try:
            return self.entries[alpha]
        except KeyError:
            raise IncompleteMomentError(f"moment {alpha} is missing") from None

    @classmethod
    def from_measure(cls, atoms, weights, order):
        """Moments of a finite atomic measure, up to degree 2 * order."""
        atoms = np.atleast_2d(np.asarray(atoms, float))
        weights = np.asarray(weights, float)
        n = atoms.shape[1]
        ent = {}
        for a in _basis(n, 2 * order):
            ent[a] = float(weights @ np.prod(atoms ** np.array(a), axis=1))
        return cls(n, order, ent)

    def first_moments(self):
        n = self.num_vars
        return np.array([float(self[tuple(int(i == j) for i in range(n))]) for j in range(n)])


def _matrix(rows):
    try:
        return np.array(rows, dtype=float)
    except (TypeError, ValueError):
        return np.array(rows, dtype=object)


def moment_matrix(y: MomentVector, N: int):
    B = _basis(y.num_vars, N)
    rows = [[y[_add(a, b)] for b in B] for a in B]
    return _matrix(rows)


def localizing_matrix(y: MomentVector, g: Polynomial, N: int):
    """Localizing matrix of order N - ceil(deg g / 2)."""
    w = math.ceil(poly_degree(g) / 2)
    if N < w:
        raise OrderTooLowError(f"order {N} is below the constraint half-degree {w}")
    B = _basis(y.num_vars, N - w)
    rows = []
    for a in B:
        row = []
        for b in B:
            ab = _add(a, b)
            acc = 0
            for beta, coef in g.items():
                acc = acc + coef * y[_add(ab, beta)]
            row.append(acc)
        rows.append(row)
    return _matrix(rows)


def _lmi_block(n, order, shift_poly, index):
    """Coefficient structure of the (localizing) moment block."""
    B = _basis(n, order)
    s = len(B)
    F0 = np.zeros((s, s))
    rows, cols, vals = [], [], []
    for p, a in enumerate(B):
        for q, b in enumerate(B):
            ab = _add(a, b)
            for beta, coef in shift_poly.items():
                if coef == 0:
                    continue
                k = _add(ab, beta)
                if not any(k):
                    F0[p, q] += coef
                else:
                    rows.append(p * s + q)
                    cols.append(index[k])
                    vals.append(coef)
    F = sp.csc_matrix((vals, (rows, cols)), shape=(s * s, len(index)))
    F.sum_duplicates()
    return LmiBlock(s, F0, F)


def relax(p: PolynomialProgram, N: int) -> SdpProblem:
    """Order-N moment relaxation with the zeroth moment fixed to one."""
    n = p.num_vars
    d0 = poly_degree(p.objective)
    ws = p.half_degrees()
    need = max([math.ceil(d0 / 2)] + ws)
    if N < need:
        raise OrderTooLowError(f"relaxation order {N} is below the required {need}")
    monos = _basis(n, 2 * N)[1:]
    index = {a: k for k, a in enumerate(monos)}
    zero = tuple([0] * n)
    blocks = [_lmi_block(n, N, {zero: 1.0}, index)]
    labels = ["moment"]
    for j, (g, w) in enumerate(zip(p.constraints, ws)):
        blocks.append(_lmi_block(n, N - w, g, index))
        labels.append(f"localizing[{j}]")
    cost = np.zeros(len(monos))
    c0 = 0.0
    for a, coef in p.objective.items():
        if not any(a):
            c0 += coef
        else:
            cost[index[a]] += coef
    prob = SdpProblem(len(monos), blocks, cost, c0, labels)
    prob.monomials = monos
    prob.num_vars = n
    prob.order = N
    return prob


def moments_from_solution(prob: SdpProblem, sol: SdpSolution) -> MomentVector:
    ent = {tuple([0] * prob.num_vars): 1.0}
    ent.update({a: float(v) for a, v in zip(prob.monomials, sol.y_star)})
    return MomentVector(prob.num_vars, prob.order, ent)


def numerical_rank(S, rel=None):
    rel = DEFAULT.moment_rank if rel is None else rel
    w = np.linalg.eigvalsh(0.5 * (S + S.T))
    top = max(float(w[-1]), 0.0)
    if top == 0.0:
        return 0
    return int(np.sum(w > rel * top))


@dataclass
class Certificate:
    rank_ok: bool
    rank_full: int
    rank_low: int
    minimizers: Optional[List[np.ndarray]] = None

    @property
    def extracted(self):
        return bool(self.minimizers)


def certify_and_extract(y_star: MomentVector, N: int, w_max: int, rel=None) -> Certificate:
    """Flatness test rank M_N = rank M_{N - w_max}; rank-one extraction."""
    r_full = numerical_rank(moment_matrix(y_star, N), rel)
    r_low = numerical_rank(moment_matrix(y_star, max(N - w_max, 0)), rel)
    ok = r_full == r_low
    mins = [y_star.first_moments()] if ok and r_full == 1 else None
    return Certificate(ok, r_full, r_low, mins)


def is_archimedean_ball(p: PolynomialProgram) -> bool:
    """Sufficient check: some constraint has a negative definite quadratic part
    and degree two, making its superlevel set a compact ellipsoid."""
    n = p.num_vars
    for g in p.constraints:
        if poly_degree(g) != 2:
            continue
        Q = np.zeros((n, n))
        for a, c in g.items():
            if sum(a) != 2:
                continue
            idx = [j for j in range(n) for _ in range(a[j])]
            if idx[0] == idx[1]:
                Q[idx[0], idx[0]] += c
            else:
                Q[idx[0], idx[1]] += c / 2
                Q[idx[1], idx[0]] += c / 2
        if np.linalg.eigvalsh(Q)[-1] < 0:
            return True
    return False


@dataclass
class RelaxationResult:
    value: float
    order: int
    moments: MomentVector
    certificate: Certificate
    sdp: SdpSolution
    archimedean: bool


def solve_relaxation(p: PolynomialProgram, N: int, rel=None, **sdp_kw) -> RelaxationResult:
    arch = is_archimedean_ball(p)
    if not arch:
        warnings.warn("compactness assumption not verified for this constraint set", stacklevel=2)
    prob = relax(p, N)
    sol = solve_sdp(prob, **sdp_kw)
    y = moments_from_solution(prob, sol)
    w_max = max([1] + p.half_degrees())
    cert = certify_and_extract(y, N, w_max, rel)
    return RelaxationResult(sol.value, N, y, cert, sol, arch)


def parse_polynomial(text: str, num_vars: Optional[int] = None) -> Polynomial:
    poly = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            coef = float(parts[0])
            exps = tuple(int(t) for t in parts[1:])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if any(e < 0 for e in exps):
            raise ValueError(f"line {lineno}: negative exponent")
        if num_vars is None:
            num_vars = len(exps)
        if len(exps) != num_vars:
            raise ValueError(f"line {lineno}: expected {num_vars} exponents, got {len(exps)}")
        poly[exps] = poly.get(exps, 0.0) + coef
    return poly


def format_polynomial(p: Polynomial) -> str:
    n = len(next(iter(p))) if p else 0
    order = {a: k for k, a in enumerate(_basis(n, poly_degree(p)))} if p else {}
    lines = [" ".join([repr(float(c))] + [str(e) for e in a])
             for a, c in sorted(p.items(), key=lambda kv: order[kv[0]])]
    return "\n".join(lines) + "\n"


def read_polynomial(path, num_vars=None) -> Polynomial:
    with open(path, encoding="utf-8") as fh:
        return parse_polynomial(fh.read(), num_vars)


def write_polynomial(path, p: Polynomial):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_polynomial(p))
