"""Rank-one feature perturbation Delta = c d^T.

Alternating optimization against projected gradient at several budgets, and
what happens once the budget reaches sigma_min.
"""
import os

from linattack import bench, rankone
from linattack.datasets import istanbul_or_synthetic
from linattack.errors import UnboundedAttackError
from linattack.regress import fit_ols

data, source = istanbul_or_synthetic(os.environ.get("ISTANBUL_CSV"))
fit = fit_ols(data)
e = rankone.selector(fit.m, 3)
print(f"data: {source}, target coefficient 4 = {fit.beta0[3]:.4f}")

print("\nfrac   AO value   AO its   PGD value   PGD its")
for frac in (0.5, 0.9, 0.95):
    eta = frac * fit.sigma_min
    ao = rankone.alternating_attack(fit, e, eta, seed=0)
    _, _, tr = bench.pgd_rankone(fit, e, eta, seed=0, a=100.0)
    print(f"{frac:4.2f} {ao.objective:10.4f} {ao.iterations:8d} {tr[-1]:11.4f} {len(tr) - 1:8d}")

try:
    rankone.alternating_attack(fit, e, 1.01 * fit.sigma_min)
except UnboundedAttackError as exc:
    print("\neta = 1.01 sigma_min:", exc)
    probe = rankone.divergence_probe(fit, e, eta=1.01 * fit.sigma_min)
    print(f"  probe h = {probe['h']:.3g} vs baseline {probe['baseline']:.3g}")
