"""
Base forecasters: OLS, LASSO and principal component regression.

Every fitted coefficient vector carries the intercept first. Standardization
statistics come from the training rows only and are reused for prediction.
Hyper-parameters are chosen by cross-validation over contiguous time blocks.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg
from pydantic import BaseModel, Field, field_validator
from sklearn.decomposition import PCA
from sklearn.preprocessing import StandardScaler

from src import error_codes
from src.errors import DataValidationError, InsufficientHistoryError
from src.logging_utils import log_event

LASSO_TOL = 1e-8
LASSO_MAX_SWEEPS = 10_000
LAMBDA_PATH_LENGTH = 20
LAMBDA_PATH_RATIO = 1e-3


class ForecasterSpec(BaseModel):
    kind: Literal["ols", "lasso", "pcr", "external"]
    name: str = ""
    features: list[str] | None = None  # None uses every available factor; [] is intercept-only
    lambda_grid: list[float] | None = None
    components: list[int] | None = None
    cv_folds: int = Field(default=5, ge=2)

    @field_validator("lambda_grid")
    @classmethod
    def _lambda_grid(cls, grid):
        if grid is not None:
            if not grid:
                raise ValueError("lambda grid must be nonempty")
            if any(lam < 0 for lam in grid):
                raise ValueError("lambda values must be nonnegative")
        return grid

    @field_validator("components")
    @classmethod
    def _components(cls, grid):
        if grid is not None:
            if not grid:
                raise ValueError("component grid must be nonempty")
            if any(m < 1 for m in grid):
                raise ValueError("component counts must be at least 1")
        return grid

    @property
    def model_id(self) -> str:
        return self.name or self.kind


def _as_design(Z, r) -> tuple[np.ndarray, np.ndarray]:
    Z = np.asarray(Z, dtype=float)
    r = np.asarray(r, dtype=float).ravel()
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[0] != r.size:
        raise DataValidationError(
            f"design has {Z.shape[0]} rows, target has {r.size}", code=error_codes.DIMENSION_MISMATCH
        )
    if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(r))):
        raise DataValidationError("non-finite training data", code=error_codes.NON_FINITE)
    return Z, r


def _with_intercept(Z: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(Z.shape[0]), Z])


def predict_linear(theta: np.ndarray, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    return theta[0] + Z @ theta[1:]


# --- OLS ---


def fit_ols(Z, r) -> np.ndarray:
    """Least squares with an intercept. Rank-deficient designs fall back to the pseudo-inverse."""
    Z, r = _as_design(Z, r)
    X = _with_intercept(Z)
    if X.shape[0] <= Z.shape[1]:
        raise InsufficientHistoryError(f"{X.shape[0]} rows for {Z.shape[1]} predictors")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        log_event("ols_rank_deficient", code=error_codes.PINV_USED, columns=X.shape[1])
        return np.linalg.pinv(X) @ r
    theta, *_ = scipy.linalg.lstsq(X, r)
    return theta


# --- LASSO ---


@dataclass(frozen=True)
class LassoFit:
    theta: np.ndarray  # intercept first, original units
    lam: float
    converged: bool
    sweeps: int


def _standardize(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = Z.mean(axis=0)
    sd = Z.std(axis=0)
    sd = np.where(sd > 0.0, sd, 1.0)
    return (Z - mean) / sd, mean, sd


def soft_threshold(x: float, threshold: float) -> float:
    return math.copysign(max(abs(x) - threshold, 0.0), x)


def _coordinate_descent(X: np.ndarray, y: np.ndarray, lam: float, theta0=None):
    """
    Minimize (1/T) Σ (y - Xθ)² + λ Σ |θ_j| on centered X, y.

    Returns (θ, converged, sweeps).
    """
    T, P = X.shape
    col_sq = (X**2).sum(axis=0) / T
    theta = np.zeros(P) if theta0 is None else theta0.copy()
    resid = y - X @ theta
    for sweep in range(1, LASSO_MAX_SWEEPS + 1):
        max_change = 0.0
        for j in range(P):
            if col_sq[j] == 0.0:
                continue
            old = theta[j]
            rho = X[:, j] @ resid / T + col_sq[j] * old
            new = soft_threshold(rho, lam / 2.0) / col_sq[j]
            if new != old:
                resid -= X[:, j] * (new - old)
                theta[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change < LASSO_TOL:
            return theta, True, sweep
    return theta, False, LASSO_MAX_SWEEPS


def fit_lasso(Z, r, lam: float) -> LassoFit:
    """L1-penalized least squares on internally standardized predictors; the intercept is unpenalized."""
    if lam < 0:
        raise DataValidationError("lambda must be nonnegative", code=error_codes.CONFIG_INVALID)
    Z, r = _as_design(Z, r)
    Zs, mean, sd = _standardize(Z)
    r_mean = r.mean()
    beta, converged, sweeps = _coordinate_descent(Zs, r - r_mean, lam)
    if not converged:
        log_event("lasso_not_converged", code=error_codes.NOT_CONVERGED, lam=lam, sweeps=sweeps)
    slopes = beta / sd
    theta = np.concatenate([[r_mean - mean @ slopes], slopes])
    return LassoFit(theta=theta, lam=float(lam), converged=converged, sweeps=sweeps)


def lambda_max(Z, r) -> float:
    """Smallest λ at which every penalized coefficient is zero."""
    Z, r = _as_design(Z, r)
    Zs, _, _ = _standardize(Z)
    return float(np.max(np.abs(2.0 * Zs.T @ (r - r.mean()) / r.size))) if Zs.shape[1] else 0.0


def lambda_path(Z, r, n: int = LAMBDA_PATH_LENGTH, ratio: float = LAMBDA_PATH_RATIO) -> list[float]:
    top = lambda_max(Z, r)
    if top <= 0.0:
        return [0.0]
    return [float(x) for x in np.geomspace(top, top * ratio, n)]


def blocked_folds(n: int, folds: int) -> list[np.ndarray]:
    """Held-out index blocks: `folds` contiguous, nearly equal slices of range(n)."""
    if folds < 2:
        raise DataValidationError("need at least 2 folds", code=error_codes.CONFIG_INVALID)
    if n < folds:
        raise InsufficientHistoryError(f"{n} rows cannot be split into {folds} folds")
    return np.array_split(np.arange(n), folds)


def _cv_error(Z: np.ndarray, r: np.ndarray, folds: int, fit_predict) -> float:
    errors = []
    for held in blocked_folds(r.size, folds):
        train = np.ones(r.size, dtype=bool)
        train[held] = False
        pred = fit_predict(Z[train], r[train], Z[held])
        errors.append(float(np.mean((r[held] - pred) ** 2)))
    return float(np.mean(errors))


def select_lasso_lambda(Z, r, grid=None, folds: int = 5) -> float:
    """λ with the lowest mean blocked-CV error; ties go to the larger λ."""
    Z, r = _as_design(Z, r)
    grid = lambda_path(Z, r) if grid is None else list(grid)
    best_lam, best_err = None, math.inf
    for lam in sorted(grid, reverse=True):
        err = _cv_error(Z, r, folds, lambda zt, rt, zh, lam=lam: predict_linear(fit_lasso(zt, rt, lam).theta, zh))
        if err < best_err:
            best_lam, best_err = float(lam), err
    return best_lam


# --- PCR ---


@dataclass(frozen=True)
class PcrFit:
    scaler: StandardScaler
    pca: PCA
    theta: np.ndarray  # intercept first, on component scores
    components: int

    def predict(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        scores = self.pca.transform(self.scaler.transform(Z))
        return predict_linear(self.theta, scores)


def fit_pcr(Z, r, M: int) -> PcrFit:
    """Regress on the top-M principal components of the standardized training design."""
    Z, r = _as_design(Z, r)
    if M < 1 or M > min(Z.shape):
        raise DataValidationError(
            f"component count {M} outside [1, {min(Z.shape)}]", code=error_codes.CONFIG_INVALID
        )
    scaler = StandardScaler().fit(Z)
    pca = PCA(n_components=M, svd_solver="full").fit(scaler.transform(Z))
    theta = fit_ols(pca.transform(scaler.transform(Z)), r)
    return PcrFit(scaler=scaler, pca=pca, theta=theta, components=M)


def select_pcr_components(Z, r, grid=None, folds: int = 5) -> int:
    """Component count with the lowest mean blocked-CV error; ties go to fewer components."""
    Z, r = _as_design(Z, r)
    fold_rows = min(r.size - len(h) for h in blocked_folds(r.size, folds))
    limit = min(Z.shape[1], fold_rows - 1)
    grid = list(range(1, limit + 1)) if grid is None else [m for m in grid if m <= limit]
    if not grid:
        raise InsufficientHistoryError("no admissible component count for this sample")
    best_m, best_err = None, math.inf
    for m in sorted(grid):
        err = _cv_error(Z, r, folds, lambda zt, rt, zh, m=m: fit_pcr(zt, rt, m).predict(zh))
        if err < best_err:
            best_m, best_err = int(m), err
    return best_m


# --- forecaster objects ---


class Forecaster(ABC):
    """Fit on a training design, then predict rows of the same predictors."""

    def __init__(self, spec: ForecasterSpec):
        self.spec = spec

    @abstractmethod
    def fit(self, Z, r) -> Forecaster: ...

    @abstractmethod
    def predict(self, Z) -> np.ndarray: ...


class OlsForecaster(Forecaster):
    def fit(self, Z, r):
        self.theta = fit_ols(Z, r)
        return self

    def predict(self, Z):
        return predict_linear(self.theta, Z)


class LassoForecaster(Forecaster):
    def fit(self, Z, r):
        Z, r = _as_design(Z, r)
        if Z.shape[1] == 0:
            self.lam = 0.0
            self.theta = np.array([r.mean()])
            return self
        self.lam = select_lasso_lambda(Z, r, self.spec.lambda_grid, self.spec.cv_folds)
        self.result = fit_lasso(Z, r, self.lam)
        self.theta = self.result.theta
        return self

    def predict(self, Z):
        return predict_linear(self.theta, Z)


class PcrForecaster(Forecaster):
    def fit(self, Z, r):
        Z, r = _as_design(Z, r)
        if Z.shape[1] == 0:
            raise InsufficientHistoryError("PCR needs at least one predictor")
        self.components = select_pcr_components(Z, r, self.spec.components, self.spec.cv_folds)
        self.model = fit_pcr(Z, r, self.components)
        return self

    def predict(self, Z):
        return self.model.predict(Z)


FORECASTERS: dict[str, type[Forecaster]] = {
    "ols": OlsForecaster,
    "lasso": LassoForecaster,
    "pcr": PcrForecaster,
}


def make_forecaster(spec: ForecasterSpec) -> Forecaster:
    if spec.kind == "external":
        raise DataValidationError(
            f"{spec.model_id} is external; its forecasts come from a predictions file",
            code=error_codes.CONFIG_INVALID,
        )
    return FORECASTERS[spec.kind](spec)
