"""
Sector-rotation portfolios: rank sectors by predicted return, bucket them,
and measure the buckets.

Frames are period-indexed (rows) by sector (columns). Returns are monthly
decimals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from src import error_codes
from src.errors import DataValidationError, ZeroVolatilityError
from src.logging_utils import log_event

PERIODS_PER_YEAR = 12
DEFAULT_SIZES_60 = (5, 15, 20, 15, 5)
TOP_BOTTOM = "Top-Bottom"


class QuantileScheme(BaseModel):
    """Bucket sizes from the lowest predictions to the highest."""

    sizes: list[int] = Field(min_length=1)

    @model_validator(mode="after")
    def _positive(self):
        if any(s < 1 for s in self.sizes):
            raise ValueError("bucket sizes must be positive")
        return self

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def labels(self) -> list[str]:
        """Rank-from-the-top labels, bottom bucket first: 'Bottom 5', '41-55', ..., 'Top 5'."""
        if len(self.sizes) == 1:
            return ["All"]
        labels = []
        lower = self.n  # rank of the worst sector in the current bucket
        for i, size in enumerate(self.sizes):
            upper = lower - size + 1
            if i == 0:
                labels.append(f"Bottom {size}")
            elif i == len(self.sizes) - 1:
                labels.append(f"Top {size}")
            else:
                labels.append(f"{upper}-{lower}" if upper != lower else str(upper))
            lower = upper - 1
        return labels

    @property
    def top(self) -> str:
        return self.labels[-1]

    @property
    def bottom(self) -> str:
        return self.labels[0]

    @classmethod
    def default_for(cls, n: int) -> QuantileScheme:
        """5/15/20/15/5 at 60 sectors; the same proportions, at least one sector per bucket, otherwise."""
        if n < 1:
            raise DataValidationError("no sectors to bucket", code=error_codes.EMPTY_SECTOR)
        if n == sum(DEFAULT_SIZES_60):
            return cls(sizes=list(DEFAULT_SIZES_60))
        if n < len(DEFAULT_SIZES_60):
            return cls(sizes=[1] * n)
        share = np.array(DEFAULT_SIZES_60, dtype=float) / sum(DEFAULT_SIZES_60) * n
        sizes = np.maximum(np.floor(share).astype(int), 1)
        remainder = share - np.floor(share)
        # hand out the leftover sectors to the largest remainders, middle bucket first on ties
        order = sorted(range(len(sizes)), key=lambda i: (-remainder[i], abs(i - len(sizes) // 2)))
        i = 0
        while sizes.sum() < n:
            sizes[order[i % len(order)]] += 1
            i += 1
        while sizes.sum() > n:
            j = int(np.argmax(sizes))
            sizes[j] -= 1
        return cls(sizes=[int(s) for s in sizes])


def scheme_for(n: int, configured: QuantileScheme | None) -> QuantileScheme:
    if configured is not None and configured.n == n:
        return configured
    return QuantileScheme.default_for(n)


def rank_and_bucket(predictions: pd.Series, scheme: QuantileScheme | None = None) -> pd.Series:
    """
    Bucket label per sector for one period.

    Sectors are sorted ascending by forecast, ties broken by sector id, and
    buckets are filled from the bottom.
    """
    preds = predictions.dropna()
    scheme = scheme or QuantileScheme.default_for(len(preds))
    if scheme.n != len(preds):
        raise DataValidationError(
            f"scheme holds {scheme.n} sectors, got {len(preds)} forecasts", code=error_codes.DIMENSION_MISMATCH
        )
    frame = pd.DataFrame({"sector": [str(s) for s in preds.index], "forecast": preds.to_numpy(dtype=float)})
    frame = frame.sort_values(["forecast", "sector"], kind="mergesort")
    labels = np.repeat(scheme.labels, scheme.sizes)
    return pd.Series(labels, index=frame["sector"].to_numpy(), name="bucket")


def assign_buckets(forecasts: pd.DataFrame, scheme: QuantileScheme | None = None) -> pd.DataFrame:
    """Bucket labels for every period; sectors without a forecast get NaN."""
    rows = {}
    for period, preds in forecasts.iterrows():
        live = preds.dropna()
        rows[period] = rank_and_bucket(live, scheme_for(len(live), scheme))
    return pd.DataFrame.from_dict(rows, orient="index").reindex(columns=forecasts.columns)


def bucket_weights(assignments: pd.DataFrame, label: str) -> pd.DataFrame:
    """Equal sector weights within one bucket, zero elsewhere; rows sum to 1."""
    member = (assignments == label).astype(float)
    counts = member.sum(axis=1).replace(0.0, np.nan)
    return member.div(counts, axis=0).fillna(0.0)


def bucket_returns(assignments: pd.DataFrame, sector_returns: pd.DataFrame, labels=None) -> pd.DataFrame:
    """
    Equal-weighted mean return of each bucket's member sectors per period,
    plus the Top-Bottom spread.
    """
    returns = sector_returns.reindex(index=assignments.index, columns=assignments.columns)
    if labels is None:
        labels = _labels_in_order(assignments)
    out = pd.DataFrame(index=assignments.index)
    for label in labels:
        out[label] = returns.where(assignments == label).mean(axis=1)
    if len(labels) > 1:
        out[TOP_BOTTOM] = out[labels[-1]] - out[labels[0]]
    return out


def bucket_predictions(assignments: pd.DataFrame, forecasts: pd.DataFrame, labels=None) -> pd.Series:
    """Average predicted return per bucket over all periods, with the Top-Bottom spread."""
    preds = bucket_returns(assignments, forecasts, labels)
    return preds.mean(axis=0)


def _labels_in_order(assignments: pd.DataFrame) -> list[str]:
    present = pd.unique(assignments.to_numpy().ravel())
    present = [p for p in present if isinstance(p, str)]
    n = int(assignments.notna().sum(axis=1).max())
    labels = QuantileScheme.default_for(n).labels
    if set(present) <= set(labels):
        return labels
    return sorted(present)


# --- costs ---


def turnover(weights: pd.DataFrame, sector_returns: pd.DataFrame) -> pd.Series:
    """
    Σ_s |w_{s,t} - w_{s,t⁻}| per period, where w_{t⁻} is last period's
    weights drifted by last period's returns. The first period has no
    entry charge.
    """
    returns = sector_returns.reindex(index=weights.index, columns=weights.columns).fillna(0.0).to_numpy()
    w = weights.fillna(0.0).to_numpy()
    out = np.zeros(len(weights))
    for t in range(1, len(weights)):
        prev = w[t - 1]
        long_leg = _drift_leg(np.clip(prev, 0.0, None), returns[t - 1])
        short_leg = _drift_leg(np.clip(-prev, 0.0, None), returns[t - 1])
        out[t] = float(np.abs(w[t] - (long_leg - short_leg)).sum())
    return pd.Series(out, index=weights.index, name="turnover")


def _drift_leg(leg: np.ndarray, r: np.ndarray) -> np.ndarray:
    gross = leg.sum()
    if gross <= 0.0:
        return leg
    grown = leg * (1.0 + r)
    total = grown.sum()
    return grown / total * gross if total > 0.0 else leg


def apply_costs(
    gross: pd.Series,
    weights: pd.DataFrame | pd.Series,
    sector_returns: pd.DataFrame | None = None,
    cost_bps: float = 5.0,
    *,
    mode: str = "linear",
) -> pd.Series:
    """
    Net return series after linear transaction costs.

    `weights` is either the per-period sector weights (turnover is computed
    with `sector_returns`) or a precomputed turnover series.
    mode "linear" charges cost_bps/10⁴ per unit of turnover; "per_point"
    charges cost_bps/10⁴ per percentage point of turnover (100× larger).
    """
    if cost_bps < 0:
        raise DataValidationError("cost_bps must be nonnegative", code=error_codes.CONFIG_INVALID)
    if isinstance(weights, pd.Series):
        to = weights.reindex(gross.index).fillna(0.0)
    else:
        if sector_returns is None:
            raise DataValidationError("sector returns are needed to drift weights", code=error_codes.MISALIGNED)
        to = turnover(weights, sector_returns).reindex(gross.index).fillna(0.0)
    if mode == "linear":
        rate = cost_bps / 1e4
    elif mode == "per_point":
        rate = cost_bps / 1e4 * 100.0
    else:
        raise DataValidationError(f"unknown cost mode {mode!r}", code=error_codes.CONFIG_INVALID)
    return (gross - rate * to).rename(gross.name)


# --- statistics ---


@dataclass(frozen=True)
class PerfStats:
    ann_return: float
    ann_vol: float
    sharpe: float
    max_drawdown: float
    sortino: float
    n: int
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, float]:
        return {
            "Annual Return": self.ann_return,
            "Annual Volatility": self.ann_vol,
            "Annual Sharpe": self.sharpe,
            "Max. Drawdown": self.max_drawdown,
            "Annual Sortino": self.sortino,
        }


def _clean(series) -> np.ndarray:
    r = np.asarray(series, dtype=float)
    r = r[~np.isnan(r)]
    if r.size == 0:
        raise DataValidationError("empty return series", code=error_codes.INSUFFICIENT_HISTORY)
    if not np.all(np.isfinite(r)):
        raise DataValidationError("non-finite return", code=error_codes.NON_FINITE)
    return r


def ann_return(series) -> float:
    return PERIODS_PER_YEAR * float(np.mean(_clean(series)))


def cumulative(series) -> np.ndarray:
    """Compounded wealth C_t = Π_{s≤t} (1 + r_s)."""
    return np.cumprod(1.0 + _clean(series))


def drawdowns(series) -> np.ndarray:
    """1 - C_t / max_{s≤t} C_s over the compounded path; the first period is its own peak."""
    wealth = cumulative(series)
    peak = np.maximum.accumulate(wealth)
    return 1.0 - wealth / peak


def max_drawdown(series) -> float:
    return float(drawdowns(series).max())


def sortino(series) -> float:
    """Annualized mean over annualized downside deviation (target 0); +inf with no downside."""
    r = _clean(series)
    downside = math.sqrt(PERIODS_PER_YEAR) * math.sqrt(float(np.mean(np.minimum(r, 0.0) ** 2)))
    mean = PERIODS_PER_YEAR * float(np.mean(r))
    if downside == 0.0:
        return math.inf if mean > 0 else (0.0 if mean == 0 else -math.inf)
    return mean / downside


def perf_stats(series) -> PerfStats:
    r = _clean(series)
    flags: list[str] = []
    if r.size < PERIODS_PER_YEAR:
        flags.append(error_codes.SHORT_SAMPLE)
        log_event("short_sample", periods=int(r.size), code=error_codes.SHORT_SAMPLE)
    if r.size < 2:
        raise ZeroVolatilityError("volatility needs at least two periods")
    vol = math.sqrt(PERIODS_PER_YEAR) * float(np.std(r, ddof=1))
    if vol == 0.0:
        raise ZeroVolatilityError("zero volatility; Sharpe ratio is undefined")
    mean = ann_return(r)
    return PerfStats(
        ann_return=mean,
        ann_vol=vol,
        sharpe=mean / vol,
        max_drawdown=max_drawdown(r),
        sortino=sortino(r),
        n=int(r.size),
        flags=tuple(flags),
    )


def perf_table(columns: dict[str, pd.Series], *, start: str | None = None, end: str | None = None) -> pd.DataFrame:
    """
    Statistic rows by portfolio columns, optionally over the [start, end]
    period range (inclusive). Columns whose statistics are undefined are NaN.
    """
    table = {}
    for name, series in columns.items():
        s = series
        if start is not None:
            s = s[s.index >= start]
        if end is not None:
            s = s[s.index <= end]
        try:
            table[name] = perf_stats(s.dropna()).as_dict()
        except (ZeroVolatilityError, DataValidationError) as e:
            log_event("perf_stats_undefined", portfolio=name, reason=str(e))
            table[name] = {k: math.nan for k in PerfStats(0, 0, 0, 0, 0, 0).as_dict()}
    return pd.DataFrame(table)


# --- benchmarks and plotting series ---


def equal_weight_benchmark(sector_returns: pd.DataFrame) -> pd.Series:
    """1/N: mean return over every live sector each period."""
    return sector_returns.mean(axis=1).rename("1/N")


def market_benchmark(factor_returns: pd.DataFrame, index) -> pd.Series:
    if "mkt" not in factor_returns.columns:
        raise DataValidationError("factor returns have no mkt column", code=error_codes.MISSING_HEADER)
    mkt = factor_returns["mkt"]
    if "rf" in factor_returns.columns:
        mkt = mkt + factor_returns["rf"]
    return mkt.reindex(index).rename("Market")


def cumulative_long(columns: dict[str, pd.Series]) -> pd.DataFrame:
    """Long-format cumulative wealth: period, portfolio, value."""
    frames = []
    for name, series in columns.items():
        s = series.dropna()
        frames.append(pd.DataFrame({"period": s.index, "portfolio": name, "value": cumulative(s)}))
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["period", "portfolio", "value"])


def drawdown_long(columns: dict[str, pd.Series]) -> pd.DataFrame:
    frames = []
    for name, series in columns.items():
        s = series.dropna()
        frames.append(pd.DataFrame({"period": s.index, "portfolio": name, "value": drawdowns(s)}))
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["period", "portfolio", "value"])
