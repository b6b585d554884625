"""Command-line entry point.

Coefficient indices on the command line are 1-based; the library uses 0-based
indices throughout.
"""
import argparse
import json
import sys

import numpy as np

from . import bench, onepoint, polyatk, rankone
from .errors import LinAttackError, UnboundedAttackError
from .regress import fit_ols

EXIT_OK, EXIT_UNCERTIFIED, EXIT_UNBOUNDED = 0, 2, 3


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text):
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        elif part.strip():
            out.append(int(part))
    return out


def _data_args(p):
    p.add_argument("--data", help="CSV path (default: $ISTANBUL_CSV, else the synthetic stand-in)")
    p.add_argument("--plain-csv", action="store_true",
                   help="first column is the response, the rest are features")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--intercept", action="store_true")
    p.add_argument("--json", action="store_true", help="machine-readable output")


def _spec(args, attack, **kw):
    etas = kw.pop("etas", None)
    frac = kw.pop("eta_as_fraction", False)
    return bench.ExperimentSpec(attack=attack, dataset=args.data, istanbul=not args.plain_csv,
                                standardize=args.standardize, intercept=args.intercept,
                                etas=etas if etas is not None else [0.2], eta_as_fraction=frac, **kw)


def _fit(args):
    data, source = bench.load_dataset(_spec(args, "one"))
    return data, fit_ols(data), source


def _emit(args, payload, lines):
    if args.json:
        print(json.dumps(payload, default=lambda o: np.asarray(o).tolist(), indent=1))
    else:
        print("\n".join(lines))


def _vec(v):
    return "[" + ", ".join(f"{x:.6g}" for x in v) + "]"


def cmd_fit(args):
    data, fit, source = _fit(args)
    s = fit.svd.singular_values
    payload = {"source": source, "n": fit.n, "m": fit.m, "beta0": fit.beta0, "sigma_min": fit.sigma_min,
               "cond": float(s[0] / s[-1]), "features": data.feature_names}
    _emit(args, payload, [f"source      {source}", f"shape       {fit.n} x {fit.m}",
                          f"beta0       {_vec(fit.beta0)}", f"sigma_min   {fit.sigma_min:.6g}",
                          f"cond(X)     {s[0] / s[-1]:.6g}"])
    return EXIT_OK


def cmd_attack_one(args):
    _, fit, source = _fit(args)
    i = args.index - 1
    if args.sense in ("minimize", "maximize"):
        p = onepoint.attack_coefficient(fit, i, args.eta, args.sense)
    else:
        p = onepoint.solve_abs_objective(fit, i, args.eta, args.sense, exact_zero=args.exact_zero)
    payload = {"source": source, "index": args.index, "eta": args.eta, "sense": args.sense,
               "x0": p.x0, "y0": p.y0, "energy": p.energy, "predicted_value": p.predicted_value,
               "beta0": fit.beta0, "beta_after": p.predicted_beta}
    _emit(args, payload, [f"x0          {_vec(p.x0)}", f"y0          {p.y0:.6g}",
                          f"energy      {p.energy:.6g}", f"beta0       {_vec(fit.beta0)}",
                          f"beta_after  {_vec(p.predicted_beta)}",
                          f"target      beta_{args.index} = {p.predicted_beta[i]:.6g}"])
    return EXIT_OK


def cmd_attack_multi(args):
    _, fit, source = _fit(args)
    i = args.index - 1
    qp = polyatk.build_quartic(fit, i, args.eta, args.lam)
    sol = polyatk.solve_quartic(qp, fit, orders=tuple(range(2, max(2, args.order) + 1)))
    p = sol.point
    payload = {"source": source, "index": args.index, "eta": args.eta, "lambda": args.lam,
               "certified": sol.certified, "order": sol.order, "value": sol.value,
               "lower_bound": sol.lower_bound, "x0": p.x0, "y0": p.y0, "beta0": fit.beta0,
               "beta_after": p.predicted_beta, "ranks": sol.ranks}
    _emit(args, payload, [f"certified   {sol.certified} (order {sol.order}, ranks {sol.ranks})",
                          f"value       {sol.value:.10g}", f"lower bound {sol.lower_bound:.10g}",
                          f"x0          {_vec(p.x0)}", f"y0          {p.y0:.6g}",
                          f"beta0       {_vec(fit.beta0)}", f"beta_after  {_vec(p.predicted_beta)}"])
    if not sol.certified:
        print("relaxation not certified at the requested orders", file=sys.stderr)
        return EXIT_UNCERTIFIED
    return EXIT_OK


def cmd_attack_rankone(args):
    _, fit, source = _fit(args)
    eta = args.eta if args.eta is not None else args.eta_frac * fit.sigma_min
    e = rankone.selector(fit.m, args.index - 1, args.sense)
    try:
        res = rankone.alternating_attack(fit, e, eta, seed=args.seed, max_iter=args.max_iter)
    except UnboundedAttackError as exc:
        c, d = exc.certificate
        print(str(exc), file=sys.stderr)
        print("certificate c = u_m (left singular vector), d = -sigma_m v_m", file=sys.stderr)
        print(f"d = {_vec(d)}", file=sys.stderr)
        probe = rankone.divergence_probe(fit, e, eta=eta)
        print(f"probe: h(t = {probe['t']:.6g}) = {probe['h']:.6g}, baseline {probe['baseline']:.6g}",
              file=sys.stderr)
        return EXIT_UNBOUNDED
    G = rankone.pinv_update(fit, res.c, res.d)[0]
    beta = (fit.pinv + G) @ fit.y
    payload = {"source": source, "index": args.index, "eta": eta, "sigma_min": fit.sigma_min,
               "objective": res.objective, "iterations": res.iterations, "converged": res.converged,
               "d": res.d, "beta0": fit.beta0, "beta_after": beta, "trace": res.trace}
    _emit(args, payload, [f"eta         {eta:.6g} ({eta / fit.sigma_min:.4g} sigma_m)",
                          f"objective   {res.objective:.10g}",
                          f"iterations  {res.iterations} (converged: {res.converged})",
                          f"d           {_vec(res.d)}", f"beta0       {_vec(fit.beta0)}",
                          f"beta_after  {_vec(beta)}"])
    return EXIT_OK


def cmd_baseline(args):
    data, fit, source = _fit(args)
    i = args.index - 1
    obj = bench.coefficient_objective(fit, i, args.sense, args.lam)
    row = bench.random_baseline(data, obj, args.eta, args.trials, args.seed, fit)
    payload = {"source": source, "objective": row.objective, "x0": row.artifact["x0"],
               "y0": row.artifact["y0"], "beta_after": row.beta_after, "trials": args.trials}
    _emit(args, payload, [f"best of {args.trials} random points: {row.objective:.10g}",
                          f"beta_after  {_vec(row.beta_after)}"])
    return EXIT_OK


def cmd_sweep(args):
    spec = _spec(args, args.attack, index=args.index - 1, etas=_floats(args.etas),
                 eta_as_fraction=args.fraction, sense=args.sense, lam=args.lam, order=args.order,
                 trials=args.trials, seeds=_ints(args.seeds), reduction=args.reduction,
                 pgd_a=args.pgd_a, pgd_target=args.pgd_target, allow_unbounded=args.allow_unbounded)
    try:
        rows, paths = bench.run(spec, out_dir=args.out, workers=args.workers)
    except UnboundedAttackError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_UNBOUNDED
    lines = [f"{r.attack:8s} eta={r.eta:<10.5g} objective={r.objective:<16.10g} it={r.iterations}"
             for r in rows]
    lines += [f"wrote {k}: {v}" for k, v in paths.items()]
    _emit(args, {"rows": [{"eta": r.eta, "objective": r.objective, "seed": r.seed} for r in rows],
                 "paths": paths}, lines)
    if args.attack == "multi" and not all(r.flags.get("certified") for r in rows):
        return EXIT_UNCERTIFIED
    return EXIT_OK


def cmd_validate(args):
    from . import validate
    results = validate.run_checks(seed=args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="linattack", description="Poisoning and rank-one attacks on least squares.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit OLS and report beta0, sigma_min")
    _data_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("attack-one", help="closed-form single poisoning point")
    _data_args(p)
    p.add_argument("--index", type=int, required=True, help="target coefficient (1-based)")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--sense", choices=["minimize", "maximize", "shrink", "grow"], default="minimize")
    p.add_argument("--exact-zero", action="store_true", help="shrink: land exactly on zero when reachable")
    p.set_defaults(func=cmd_attack_one)

    p = sub.add_parser("attack-multi", help="target one coefficient, hold the rest (moment relaxation)")
    _data_args(p)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--lam", type=float, default=-1.0)
    p.add_argument("--order", type=int, default=3, help="highest relaxation order to try")
    p.set_defaults(func=cmd_attack_multi)

    p = sub.add_parser("attack-rankone", help="rank-one feature perturbation by alternating optimization")
    _data_args(p)
    p.add_argument("--index", type=int, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--eta", type=float)
    g.add_argument("--eta-frac", type=float, help="budget as a fraction of sigma_min")
    p.add_argument("--sense", choices=["minimize", "maximize"], default="minimize")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.set_defaults(func=cmd_attack_rankone)

    p = sub.add_parser("baseline", help="best-of-N random poisoning points")
    _data_args(p)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--sense", choices=["minimize", "maximize", "shrink", "grow", "multi"], default="minimize")
    p.add_argument("--lam", type=float, default=-1.0)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", help="run an experiment grid, write CSV/NPZ/SVG")
    _data_args(p)
    p.add_argument("--attack", choices=list(bench.ATTACKS), required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--etas", required=True, help="comma-separated budgets")
    p.add_argument("--fraction", action="store_true", help="budgets are fractions of sigma_min")
    p.add_argument("--sense", default="minimize")
    p.add_argument("--lam", type=float, default=-1.0)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seeds", default="0", help="e.g. 0,1,2 or 0-99")
    p.add_argument("--reduction", choices=["best", "mean"], default="best")
    p.add_argument("--pgd-a", type=float, default=100.0)
    p.add_argument("--pgd-target", choices=["rankone", "multi"], default="rankone")
    p.add_argument("--workers", type=int, default=None,
                   help=f"process pool size (default ${bench.THREADS_ENV} or 1)")
    p.add_argument("--allow-unbounded", action="store_true",
                   help="permit rank-one budgets at or above sigma_min (reports the certificate)")
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="gradient and identity self-checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LinAttackError, ValueError, KeyError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
