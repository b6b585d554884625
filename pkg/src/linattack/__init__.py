"""Optimal poisoning and rank-one feature attacks on least squares regression."""
from .errors import (DegenerateTargetError, DimensionError, InfeasibleRecoveryError, LinAttackError,
                     NumericalFailure, UnboundedAttackError)
from .regress import Dataset, PoisonPoint, RegressionFit, fit_ols, fit_ridge, refit_add_point, refit_direct
from .onepoint import attack_coefficient, solve_abs_objective
from .polyatk import build_quartic, solve_quartic
from .rankone import alternating_attack, check_unbounded
from .datasets import load_csv, load_istanbul, synthetic_istanbul

__version__ = "0.1.0"
