"""Least squares fits and the one-point refit identity."""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import matkit
from .errors import DimensionError, SingularMatrixError
from .tolerances import DEFAULT


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise DimensionError(f"X must be 2-d, got shape {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise DimensionError(f"y has {y.shape[0]} entries but X has {X.shape[0]} rows")
        if X.shape[0] <= X.shape[1]:
            raise DimensionError(f"need more samples than features, got {X.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset has non-finite entries")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DimensionError("feature_names length does not match X")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class RegressionFit:
    """Clean fit plus every derived quantity the attacks consume.

    ``gram_inv`` is A = (X^T X + reg I)^{-1}; ``pinv`` is A X^T, which is the
    Moore-Penrose inverse when ``reg == 0``.
    """
    X: np.ndarray
    y: np.ndarray
    beta0: np.ndarray
    gram_inv: np.ndarray
    pinv: np.ndarray
    svd: matkit.SvdFactors
    proj_residual: np.ndarray
    reg: float = 0.0

    @property
    def m(self):
        return self.X.shape[1]

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def sigma_min(self):
        return self.svd.sigma_min


@dataclass
class PoisonPoint:
    x0: np.ndarray
    y0: float
    predicted_beta: Optional[np.ndarray] = None
    predicted_value: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def energy(self):
        return float(np.sqrt(np.dot(self.x0, self.x0) + self.y0 ** 2))


def _fit(data, reg):
    f = matkit.svd(data.X)
    s = f.singular_values
    if s[-1] <= DEFAULT.rank * s[0]:
        raise SingularMatrixError("feature matrix is rank deficient", sigma_min=float(s[-1]))
    m = data.m
    V, Um = f.V, f.U[:, :m]
    A = (V / (s ** 2 + reg)) @ V.T
    A = 0.5 * (A + A.T)
    pinv = (V * (s / (s ** 2 + reg))) @ Um.T
    beta0 = pinv @ data.y
    proj = np.eye(data.n) - data.X @ pinv
    return RegressionFit(X=data.X, y=data.y, beta0=beta0, gram_inv=A, pinv=pinv,
                         svd=f, proj_residual=0.5 * (proj + proj.T), reg=float(reg))


def fit_ols(data: Dataset) -> RegressionFit:
    return _fit(data, 0.0)


def fit_ridge(data: Dataset, reg: float) -> RegressionFit:
    if reg < 0:
        raise ValueError("ridge parameter must be nonnegative")
    return _fit(data, reg)


def _point_parts(point):
    if isinstance(point, PoisonPoint):
        return np.asarray(point.x0, float), float(point.y0)
    x0, y0 = point
    return np.asarray(x0, float), float(y0)


def refit_add_point(fit: RegressionFit, point) -> np.ndarray:
    """Coefficients after appending one sample, via Sherman-Morrison.

    ``point`` is a PoisonPoint or an ``(x0, y0)`` pair.
    """
    x0, y0 = _point_parts(point)
    if x0.shape != (fit.m,):
        raise DimensionError(f"x0 must have length {fit.m}")
    Ax = fit.gram_inv @ x0
    return fit.beta0 + Ax * (y0 - x0 @ fit.beta0) / (1.0 + x0 @ Ax)


def refit_add_points(fit: RegressionFit, X0, y0) -> np.ndarray:
    """Row-wise version of refit_add_point; returns shape (k, m)."""
    X0 = np.atleast_2d(np.asarray(X0, float))
    y0 = np.asarray(y0, float).reshape(-1)
    AX = X0 @ fit.gram_inv
    scale = (y0 - X0 @ fit.beta0) / (1.0 + np.einsum("ij,ij->i", X0, AX))
    return fit.beta0 + AX * scale[:, None]


def refit_direct(data: Dataset, point, reg: float = 0.0) -> np.ndarray:
    """Solve least squares on the dataset with the point prepended."""
    x0, y0 = _point_parts(point)
    Xh = np.vstack([x0, data.X])
    yh = np.concatenate([[y0], data.y])
    if reg == 0.0:
        beta, _, rank, _ = np.linalg.lstsq(Xh, yh, rcond=None)
        if rank < data.m:
            raise SingularMatrixError("augmented matrix is rank deficient")
        return beta
    return np.linalg.solve(Xh.T @ Xh + reg * np.eye(data.m), Xh.T @ yh)
