"""One poisoning point against least squares.

Fits OLS on the Istanbul data (or the synthetic stand-in when ISTANBUL_CSV
is unset), then pushes each coefficient down and up with a single point of
norm eta, and compares with the best of 10^4 random points.
"""
import os

import numpy as np

from linattack import bench, onepoint
from linattack.datasets import istanbul_or_synthetic
from linattack.regress import fit_ols, refit_direct

data, source = istanbul_or_synthetic(os.environ.get("ISTANBUL_CSV"))
fit = fit_ols(data)
print(f"data: {source}, {fit.n} x {fit.m}, sigma_min = {fit.sigma_min:.4f}")
print("beta0:", np.round(fit.beta0, 4))

eta = 0.2
print(f"\neta = {eta}")
print(" i   beta0     min      max    random-min")
for i in range(fit.m):
    lo = onepoint.attack_coefficient(fit, i, eta, "minimize")
    hi = onepoint.attack_coefficient(fit, i, eta, "maximize")
    rnd = bench.random_baseline(data, bench.coefficient_objective(fit, i), eta, 10_000, seed=i, fit=fit)
    print(f"{i + 1:2d} {fit.beta0[i]:8.4f} {lo.predicted_value:8.4f} {hi.predicted_value:8.4f} {rnd.objective:8.4f}")

# the prediction is exact: refitting on the poisoned data gives the same coefficient
p = onepoint.attack_coefficient(fit, 3, eta)
print("\nrefit check, coefficient 4:", p.predicted_value, refit_direct(data, p)[3])
print("KKT residuals:", onepoint.kkt_residual(fit, p))

# budget needed to flip the sign of the smallest coefficient
i = int(np.argmin(np.abs(fit.beta0)))
z = onepoint.solve_abs_objective(fit, i, 1.0, "shrink", exact_zero=True)
print(f"\ncoefficient {i + 1} reaches zero with eta = {z.meta.get('eta_used', float('nan')):.4g}")
