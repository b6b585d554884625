"""Experiment harness: random baselines, sweeps, result tables and plots."""
import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from . import onepoint, pgd, polyatk, rankone
from .datasets import istanbul_or_synthetic, load_csv, load_istanbul, make_rng
from .errors import UnboundedAttackError
from .regress import Dataset, PoisonPoint, fit_ols, refit_add_points, refit_direct

THREADS_ENV = "LINATTACK_THREADS"
ATTACKS = ("one", "multi", "rankone", "pgd", "random")


def default_workers():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class ExperimentSpec:
    attack: str = "one"
    index: int = 0                      # zero-based coefficient index
    etas: List[float] = field(default_factory=lambda: [0.2])
    eta_as_fraction: bool = False       # etas are fractions of sigma_m
    sense: str = "minimize"             # minimize|maximize|shrink|grow
    lam: float = -1.0
    order: int = 3                      # highest relaxation order tried
    trials: int = 10_000
    seeds: List[int] = field(default_factory=lambda: [0])
    reduction: str = "best"             # best|mean over seeds
    pgd_a: float = 100.0
    pgd_target: str = "rankone"         # rankone|multi
    dataset: Optional[str] = None
    istanbul: bool = True               # pick the Istanbul columns by name
    standardize: bool = False
    intercept: bool = False
    allow_unbounded: bool = False

    def __post_init__(self):
        if self.attack not in ATTACKS:
            raise ValueError(f"attack must be one of {ATTACKS}")
        if self.reduction not in ("best", "mean"):
            raise ValueError("reduction must be best or mean")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.attack == "rankone" and self.eta_as_fraction and not self.allow_unbounded:
            if any(f >= 1.0 for f in self.etas):
                raise ValueError("rank-one budgets must stay below sigma_m")


@dataclass
class ResultRow:
    attack: str
    index: int
    eta: float
    objective: float
    beta_before: np.ndarray
    beta_after: np.ndarray
    iterations: int = 0
    wall_time: float = 0.0
    flags: dict = field(default_factory=dict)
    seed: Optional[int] = None
    eta_fraction: Optional[float] = None
    label: str = ""
    artifact: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)

    def key(self):
        return (self.attack, self.label, self.index, self.eta, -1 if self.seed is None else self.seed)


def load_dataset(spec: ExperimentSpec):
    if spec.dataset is None:
        data, source = istanbul_or_synthetic()
    elif spec.istanbul:
        try:
            data, source = load_istanbul(spec.dataset), f"csv:{spec.dataset}"
        except KeyError:
            data, source = load_csv(spec.dataset), f"csv:{spec.dataset}"
    else:
        data, source = load_csv(spec.dataset), f"csv:{spec.dataset}"
    X, y = data.X, data.y
    if spec.standardize:
        X = (X - X.mean(axis=0)) / X.std(axis=0)
        y = y - y.mean()
    if spec.intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
    return Dataset(X, y, data.feature_names), source


# objectives over refit coefficients, rows of B; smaller is better

def coefficient_objective(fit, i, sense="minimize", lam=None):
    b0 = fit.beta0
    if sense == "multi":
        w = np.ones(fit.m)
        w[i] = lam

        def f(B):
            D = np.atleast_2d(B) - b0
            D[:, i] = np.atleast_2d(B)[:, i]
            return 0.5 * (D * D) @ w
        return f
    table = {
        "minimize": lambda B: np.atleast_2d(B)[:, i],
        "maximize": lambda B: -np.atleast_2d(B)[:, i],
        "shrink": lambda B: np.abs(np.atleast_2d(B)[:, i]),
        "grow": lambda B: -np.abs(np.atleast_2d(B)[:, i]),
    }
    return table[sense]


def random_baseline(data: Dataset, objective, eta, trials, seed, fit=None, chunk=50_000) -> ResultRow:
    """Best of ``trials`` Gaussian points rescaled jointly to norm eta.

    ``objective`` maps refit coefficient rows to scores (lower is better).
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    fit = fit_ols(data) if fit is None else fit
    rng = make_rng(seed)
    t0 = time.perf_counter()
    best, best_z, best_b = np.inf, None, None
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        Z = rng.standard_normal((k, fit.m + 1))
        Z *= eta / np.linalg.norm(Z, axis=1, keepdims=True)
        B = refit_add_points(fit, Z[:, :-1], Z[:, -1])
        vals = objective(B)
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, best_z, best_b = float(vals[j]), Z[j].copy(), B[j].copy()
        done += k
    return ResultRow(attack="random", index=-1, eta=float(eta), objective=best,
                     beta_before=fit.beta0.copy(), beta_after=best_b, iterations=trials,
                     wall_time=time.perf_counter() - t0, seed=seed,
                     artifact={"x0": best_z[:-1], "y0": float(best_z[-1])})


def _one_row(fit, spec, eta):
    t0 = time.perf_counter()
    i = spec.index
    if spec.sense in ("minimize", "maximize"):
        p = onepoint.attack_coefficient(fit, i, eta, spec.sense)
        obj = p.predicted_value
    else:
        p = onepoint.solve_abs_objective(fit, i, eta, spec.sense)
        obj = p.meta["abs_value"]
    return ResultRow("one", i, float(eta), float(obj), fit.beta0.copy(), p.predicted_beta,
                     wall_time=time.perf_counter() - t0, label=spec.sense,
                     flags={"certified": True}, artifact={"x0": p.x0, "y0": p.y0})


def _multi_row(fit, spec, eta):
    t0 = time.perf_counter()
    qp = polyatk.build_quartic(fit, spec.index, eta, spec.lam)
    orders = tuple(range(2, max(2, spec.order) + 1))
    sol = polyatk.solve_quartic(qp, fit, orders=orders)
    p = sol.point
    return ResultRow("multi", spec.index, float(eta), float(sol.value), fit.beta0.copy(), p.predicted_beta,
                     wall_time=time.perf_counter() - t0, label=f"lambda={spec.lam:g}",
                     flags={"certified": sol.certified, "order": sol.order, "lower_bound": sol.lower_bound,
                            "tiebreak": sol.tiebreak},
                     artifact={"x0": p.x0, "y0": p.y0})


def _rankone_task(args):
    fit, e, eta, seed, frac, index = args
    t0 = time.perf_counter()
    res = rankone.alternating_attack(fit, e, eta, seed=seed)
    G = rankone.pinv_update(fit, res.c, res.d)[0]
    return ResultRow("rankone", index, float(eta), res.objective, fit.beta0.copy(),
                     (fit.pinv + G) @ fit.y, iterations=res.iterations,
                     wall_time=time.perf_counter() - t0, seed=seed, eta_fraction=frac,
                     flags={"converged": res.converged}, artifact={"c": res.c, "d": res.d},
                     trace=list(res.trace))


def pgd_rankone(fit, e, eta, seed, a=100.0, max_iter=10_000, tol=1e-9):
    ctx = rankone.RankOneContext(fit, e, eta)
    c0, d0 = rankone.initial_point(fit, eta, seed)
    cfg = pgd.PgdConfig(a=a, max_iter=max_iter, tol=tol, seed=seed)
    (c, d), trace = pgd.pgd_minimize(lambda b: rankone.objective_h(ctx, b[0], b[1]),
                                     lambda b: list(pgd.grad_h(ctx, b[0], b[1])),
                                     [1.0, eta], [c0, d0], cfg)
    return c, d, trace


def pgd_quartic(fit, i, eta, lam, seed, a=1.0, max_iter=10_000, tol=1e-9):
    """PGD on the ball form of the multi-coefficient objective, random start."""
    qp = polyatk.build_quartic(fit, i, eta, lam)
    rng = make_rng(seed)
    g = rng.standard_normal(qp.dim)
    x0 = eta * rng.random() ** (1.0 / qp.dim) * g / np.linalg.norm(g)
    cfg = pgd.PgdConfig(a=a, max_iter=max_iter, tol=tol, seed=seed)
    x, trace = pgd.pgd_minimize(qp.value, lambda v: pgd.grad_quartic(qp, v), eta, x0, cfg)
    return qp, x, trace


def _pgd_task(args):
    fit, spec, eta, seed, frac = args
    t0 = time.perf_counter()
    if spec.pgd_target == "rankone":
        e = rankone.selector(fit.m, spec.index, "minimize" if spec.sense != "maximize" else "maximize")
        c, d, trace = pgd_rankone(fit, e, eta, seed, spec.pgd_a)
        B = np.linalg.lstsq(fit.X + np.outer(c, d), fit.y, rcond=None)[0]
        art = {"c": c, "d": d}
    else:
        qp, x, trace = pgd_quartic(fit, spec.index, eta, spec.lam, seed, spec.pgd_a)
        p = polyatk.recover_attack(x, qp, fit)
        B = p.predicted_beta
        art = {"x0": p.x0, "y0": p.y0}
    return ResultRow("pgd", spec.index, float(eta), float(trace[-1]), fit.beta0.copy(), B,
                     iterations=len(trace) - 1, wall_time=time.perf_counter() - t0, seed=seed,
                     eta_fraction=frac, label=spec.pgd_target, artifact=art, trace=list(trace))


def _reduce(rows, how):
    if how == "best" or len(rows) == 1:
        return [min(rows, key=lambda r: r.objective)]
    best = min(rows, key=lambda r: r.objective)
    mean = ResultRow(**{**asdict(best), "objective": float(np.mean([r.objective for r in rows]))})
    mean.flags = dict(best.flags, reduction="mean", restarts=len(rows))
    mean.seed = None
    return [mean]


def run(spec: ExperimentSpec, out_dir=None, workers=None, reduce=True):
    """Run one experiment; returns (rows, artifact paths)."""
    data, source = load_dataset(spec)
    fit = fit_ols(data)
    workers = default_workers() if workers is None else workers
    etas = [f * fit.sigma_min for f in spec.etas] if spec.eta_as_fraction else list(spec.etas)
    fracs = list(spec.etas) if spec.eta_as_fraction else [None] * len(etas)
    rows = []
    try:
        if spec.attack == "one":
            rows = [_one_row(fit, spec, eta) for eta in etas]
        elif spec.attack == "multi":
            rows = [_multi_row(fit, spec, eta) for eta in etas]
        elif spec.attack == "random":
            sense = "multi" if spec.sense == "multi" else spec.sense
            obj = coefficient_objective(fit, spec.index, sense, spec.lam)
            for eta in etas:
                for s in spec.seeds:
                    r = random_baseline(data, obj, eta, spec.trials, s, fit)
                    r.index, r.label = spec.index, sense
                    rows.append(r)
        elif spec.attack in ("rankone", "pgd"):
            if spec.attack == "rankone":
                e = rankone.selector(fit.m, spec.index, "maximize" if spec.sense == "maximize" else "minimize")
                tasks = [(fit, e, eta, s, f, spec.index) for eta, f in zip(etas, fracs) for s in spec.seeds]
                fn = _rankone_task
            else:
                tasks = [(fit, spec, eta, s, f) for eta, f in zip(etas, fracs) for s in spec.seeds]
                fn = _pgd_task
            if workers > 1 and len(tasks) > 1:
                with ProcessPoolExecutor(max_workers=workers) as ex:
                    all_rows = list(ex.map(fn, tasks))
            else:
                all_rows = [fn(t) for t in tasks]
            if reduce:
                for eta in etas:
                    group = [r for r in all_rows if r.eta == float(eta)]
                    rows.extend(_reduce(group, spec.reduction))
            else:
                rows = all_rows
    except UnboundedAttackError:
        raise
    except Exception as exc:
        raise type(exc)(f"{exc} [spec: attack={spec.attack}, index={spec.index}, etas={spec.etas}]") from exc
    for r in rows:
        r.flags.setdefault("source", source)
    rows.sort(key=lambda r: r.key())
    paths = {}
    if out_dir is not None:
        paths = write_outputs(rows, out_dir, spec, fit)
    return rows, paths


CSV_FIELDS = ["attack", "label", "index", "eta", "eta_fraction", "seed", "objective", "iterations",
              "wall_time", "certified", "beta_before", "beta_after", "source"]


def _vec(v):
    return ";".join(repr(float(x)) for x in v)


def write_results_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in rows:
            w.writerow([r.attack, r.label, r.index + 1, repr(r.eta),
                        "" if r.eta_fraction is None else repr(r.eta_fraction),
                        "" if r.seed is None else r.seed, repr(float(r.objective)), r.iterations,
                        f"{r.wall_time:.6f}", r.flags.get("certified", ""),
                        _vec(r.beta_before), _vec(r.beta_after), r.flags.get("source", "")])


def read_results_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        out = []
        for rec in csv.DictReader(fh):
            rec["beta_before"] = np.array([float(x) for x in rec["beta_before"].split(";")])
            rec["beta_after"] = np.array([float(x) for x in rec["beta_after"].split(";")])
            rec["objective"] = float(rec["objective"])
            rec["eta"] = float(rec["eta"])
            out.append(rec)
        return out


def write_artifacts(rows, path):
    arrays = {}
    for k, r in enumerate(rows):
        for name, val in r.artifact.items():
            arrays[f"row{k}_{name}"] = np.asarray(val, float)
        arrays[f"row{k}_beta_after"] = np.asarray(r.beta_after, float)
        if r.trace:
            arrays[f"row{k}_trace"] = np.asarray(r.trace, float)
    np.savez(path, **arrays)


def replay_beta(data: Dataset, row_or_artifact):
    """Refit on the stored poisoned data; independent of the solver path."""
    art = row_or_artifact.artifact if isinstance(row_or_artifact, ResultRow) else row_or_artifact
    if "c" in art:
        Xh = data.X + np.outer(art["c"], art["d"])
        return np.linalg.lstsq(Xh, data.y, rcond=None)[0]
    return refit_direct(data, PoisonPoint(np.asarray(art["x0"]), float(art["y0"])))


def write_outputs(rows, out_dir, spec, fit):
    from . import plots
    os.makedirs(out_dir, exist_ok=True)
    paths = {"csv": os.path.join(out_dir, "results.csv"), "npz": os.path.join(out_dir, "artifacts.npz")}
    write_results_csv(rows, paths["csv"])
    write_artifacts(rows, paths["npz"])
    paths.update(plots.emit(rows, out_dir, fit))
    return paths
