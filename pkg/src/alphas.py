"""
Factor-model alphas and subsample means with Newey-West t-statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats

from src import error_codes
from src.errors import DataValidationError, NumericalError

FACTOR_MODELS: dict[str, tuple[str, ...]] = {
    "excess": (),
    "capm": ("mkt",),
    "ff3": ("mkt", "smb", "hml"),
    "carhart4": ("mkt", "smb", "hml", "mom"),
}

STAR_LEVELS = ((0.01, "***"), (0.05, "**"), (0.10, "*"))


def default_nw_lags(n: int) -> int:
    """floor(4 (T/100)^(2/9))."""
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def newey_west_cov(X: np.ndarray, resid: np.ndarray, lags: int) -> np.ndarray:
    """
    HAC covariance of OLS coefficients with Bartlett weights 1 - j/(lags+1).

    lags = 0 gives White's heteroskedasticity-robust (HC0) sandwich.
    """
    X = np.asarray(X, dtype=float)
    e = np.asarray(resid, dtype=float)
    if lags < 0:
        raise DataValidationError("Newey-West lag must be nonnegative", code=error_codes.CONFIG_INVALID)
    scores = X * e[:, None]
    meat = scores.T @ scores
    for j in range(1, min(lags, len(e) - 1) + 1):
        weight = 1.0 - j / (lags + 1.0)
        gamma = scores[j:].T @ scores[:-j]
        meat += weight * (gamma + gamma.T)
    bread = np.linalg.inv(X.T @ X)
    return bread @ meat @ bread


@dataclass(frozen=True)
class RegressionResult:
    coefficients: dict[str, float]
    std_errors: dict[str, float]
    t_stats: dict[str, float]
    n: int
    lags: int
    model: str = ""

    @property
    def alpha(self) -> float:
        return self.coefficients["alpha"]

    @property
    def t_stat(self) -> float:
        return self.t_stats["alpha"]


def hac_regression(y, X, names, *, nw_lags: int | None = None, model: str = "") -> RegressionResult:
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n = y.size
    if n <= X.shape[1]:
        raise DataValidationError(f"{n} observations for {X.shape[1]} regressors", code=error_codes.INSUFFICIENT_HISTORY)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise NumericalError("factor matrix is rank deficient", code=error_codes.RANK_DEFICIENT)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    lags = default_nw_lags(n) if nw_lags is None else int(nw_lags)
    se = np.sqrt(np.diag(newey_west_cov(X, resid, lags)))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0.0, beta / se, np.nan)
    return RegressionResult(
        coefficients=dict(zip(names, beta.tolist())),
        std_errors=dict(zip(names, se.tolist())),
        t_stats=dict(zip(names, t.tolist())),
        n=n,
        lags=lags,
        model=model,
    )


def factor_alphas(
    excess: pd.Series,
    factors: pd.DataFrame,
    model: str = "capm",
    nw_lags: int | None = None,
) -> RegressionResult:
    """
    OLS of excess returns on an intercept plus the model's factors, with
    Newey-West standard errors. model "excess" regresses on the intercept only.
    """
    if model not in FACTOR_MODELS:
        raise DataValidationError(f"unknown factor model {model!r}", code=error_codes.CONFIG_INVALID)
    cols = list(FACTOR_MODELS[model])
    missing = [c for c in cols if c not in factors.columns]
    if missing:
        raise DataValidationError(f"factor file lacks {missing}", code=error_codes.MISSING_HEADER)
    y = excess.dropna()
    absent = y.index.difference(factors.index)
    if len(absent):
        raise DataValidationError(
            f"{len(absent)} return periods have no factor row, first {absent[0]}", code=error_codes.MISALIGNED
        )
    f = factors.loc[y.index, cols]
    if f.isna().to_numpy().any():
        raise DataValidationError("factor values missing on return periods", code=error_codes.MISALIGNED)
    X = np.column_stack([np.ones(len(y)), f.to_numpy(dtype=float)])
    return hac_regression(y.to_numpy(), X, ["alpha", *cols], nw_lags=nw_lags, model=model)


def significance_stars(t: float) -> str:
    """'***', '**', '*' at the two-sided 1%, 5% and 10% normal levels."""
    if t is None or not np.isfinite(t):
        return ""
    for level, stars in STAR_LEVELS:
        if abs(t) >= stats.norm.ppf(1.0 - level / 2.0):
            return stars
    return ""


def subsample_stats(series: pd.Series, indicator: pd.Series, labels: dict | None = None, *, nw_lags: int | None = None) -> pd.DataFrame:
    """
    Mean return and Newey-West t-statistic per indicator value.

    The indicator is aligned to the series by period; periods where it is
    missing are left out. `labels` renames indicator values.
    """
    joined = pd.concat({"r": series, "ind": indicator}, axis=1, join="inner").dropna()
    rows = []
    for value in sorted(joined["ind"].unique(), key=str):
        cell = joined.loc[joined["ind"] == value, "r"].to_numpy(dtype=float)
        name = labels.get(value, str(value)) if labels else str(value)
        if cell.size < 2:
            rows.append({"subsample": name, "n": int(cell.size), "mean": float(cell.mean()), "t_stat": math.nan})
            continue
        result = hac_regression(cell, np.ones((cell.size, 1)), ["alpha"], nw_lags=nw_lags, model="mean")
        rows.append({"subsample": name, "n": int(cell.size), "mean": result.alpha, "t_stat": result.t_stat})
    return pd.DataFrame(rows, columns=["subsample", "n", "mean", "t_stat"])


# --- indicator builders ---


def prior_month_sign(market: pd.Series) -> pd.Series:
    """'up' when the market return in the month before formation was nonnegative, else 'down'."""
    lagged = market.shift(1)
    out = pd.Series(np.where(lagged >= 0.0, "up", "down"), index=market.index, dtype=object)
    return out.where(lagged.notna()).rename("market_sign")


def date_split(periods, split_period: str) -> pd.Series:
    """'before' for periods earlier than `split_period`, 'after' otherwise."""
    index = pd.Index([str(p) for p in periods])
    return pd.Series(np.where(index < str(split_period), "before", "after"), index=index, name="date_split")


def moving_average_sign(series: pd.Series, window: int = 3) -> pd.Series:
    """'above' where the trailing `window`-period mean is nonnegative, 'below' where negative."""
    ma = series.rolling(window).mean()
    out = pd.Series(np.where(ma >= 0.0, "above", "below"), index=series.index, dtype=object)
    return out.where(ma.notna()).rename("activity")
