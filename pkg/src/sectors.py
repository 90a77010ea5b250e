"""
Sector aggregation: sector returns and sector-level factor scores.

Membership is decided per period from each asset's sector_code, so an asset
that migrates between sectors contributes to whichever sector it belongs to
in that period.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from src import error_codes
from src.errors import DataValidationError, FactorUnavailableError
from src.logging_utils import log_event
from src.ppca import DEFAULT_MAX_ITER, DEFAULT_TOL, PpcaModel, ppca_fit, ppca_scores
from src.schemas import AssetPanel, SectorPanel


@dataclass(frozen=True)
class SectorReturns:
    """Period × sector return table plus the sector-periods that fell back to equal weighting."""

    returns: pd.DataFrame
    fallbacks: tuple[tuple[str, str], ...] = ()


def _month_ordinal(periods: pd.Series) -> np.ndarray:
    idx = pd.PeriodIndex(periods.astype(str), freq="M")
    return (idx.year * 12 + idx.month).to_numpy()


def _check_no_gaps(table: pd.DataFrame) -> None:
    for sector in table.columns:
        col = table[sector]
        first, last = col.first_valid_index(), col.last_valid_index()
        if first is None:
            continue
        span = col.loc[first:last]
        if span.isna().any():
            gap = span[span.isna()].index[0]
            raise DataValidationError(
                f"sector {sector} has no assets in period {gap}", code=error_codes.EMPTY_SECTOR
            )


def sector_returns(panel: AssetPanel, weighting: str = "equal") -> SectorReturns:
    """
    Sector return per period.

    equal: mean of member returns.
    cap:   Σ c_{t-1} r_t / Σ c_{t-1}, each asset weighted by its own market
           cap from the immediately preceding month. Members without a lagged
           cap are left out; a sector-period whose lagged caps are all zero or
           absent falls back to the equal-weighted mean and is flagged.
    """
    obs = panel.observations
    if weighting == "equal":
        table = obs.groupby(["period", "sector_code"])["ret"].mean().unstack("sector_code")
        table = table.sort_index()
        _check_no_gaps(table)
        return SectorReturns(returns=table)
    if weighting != "cap":
        raise DataValidationError(f"unknown weighting {weighting!r}", code=error_codes.CONFIG_INVALID)

    frame = obs.copy()
    frame["_ord"] = _month_ordinal(frame["period"])
    frame = frame.sort_values(["asset_id", "_ord"], kind="mergesort")
    grouped = frame.groupby("asset_id", sort=False)
    prev_cap = grouped["market_cap"].shift(1)
    prev_ord = grouped["_ord"].shift(1)
    frame["_lag_cap"] = prev_cap.where(prev_ord == frame["_ord"] - 1)

    equal = frame.groupby(["period", "sector_code"])["ret"].mean()
    lagged = frame.dropna(subset=["_lag_cap"])
    num = (lagged["_lag_cap"] * lagged["ret"]).groupby([lagged["period"], lagged["sector_code"]]).sum()
    den = lagged.groupby(["period", "sector_code"])["_lag_cap"].sum()
    weighted = (num / den.where(den > 0.0)).reindex(equal.index)

    fallback = weighted.isna()
    fallbacks = tuple((str(sector), str(period)) for period, sector in weighted.index[fallback])
    for sector, period in fallbacks:
        log_event("cap_weight_fallback", sector_id=sector, period=period, code=error_codes.CAP_FALLBACK)
    table = weighted.fillna(equal).unstack("sector_code").sort_index()
    _check_no_gaps(table)
    return SectorReturns(returns=table, fallbacks=fallbacks)


def factor_matrix(panel: AssetPanel, sector: str, factor_name: str, periods) -> tuple[np.ndarray, list[str]]:
    """
    Asset × period matrix of one characteristic for the sector's members.

    Membership comes from the return record of the same (period, asset).
    Missing values are NaN; assets with no observation in `periods` are dropped.
    """
    periods = [str(p) for p in periods]
    members = panel.observations.loc[
        panel.observations["sector_code"] == str(sector), ["period", "asset_id"]
    ]
    values = panel.factor_values.loc[panel.factor_values["factor_name"] == factor_name]
    values = values.merge(members, on=["period", "asset_id"], how="inner")
    values = values.loc[values["period"].isin(periods)]
    wide = values.pivot(index="asset_id", columns="period", values="value").reindex(columns=periods)
    wide = wide.dropna(how="all")
    return wide.to_numpy(dtype=float), [str(a) for a in wide.index]


@dataclass(frozen=True)
class SectorFactorFit:
    """A q=1 PPCA fit on standardized characteristics, with the standardization kept for projection."""

    assets: tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray
    model: PpcaModel
    scores: np.ndarray  # one score per fitted period; 0 where nothing was observed


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    means = np.nanmean(X, axis=1)
    sds = np.nanstd(X, axis=1)
    sds = np.where(sds > 0.0, sds, 1.0)
    return (X - means[:, None]) / sds[:, None], means, sds


def fit_sector_factor(
    panel: AssetPanel,
    sector: str,
    factor_name: str,
    periods,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SectorFactorFit:
    X, assets = factor_matrix(panel, sector, factor_name, periods)
    if len(assets) < 2:
        raise FactorUnavailableError(
            f"factor {factor_name} has {len(assets)} usable assets in sector {sector}, need 2"
        )
    Z, means, sds = _standardize(X)
    seen = ~np.isnan(Z).all(axis=0)
    model = ppca_fit(Z[:, seen], 1, tol=tol, max_iter=max_iter, min_observed_fraction=0.0)
    scores = np.zeros(Z.shape[1])
    scores[seen] = model.F[0]
    return SectorFactorFit(assets=tuple(assets), means=means, sds=sds, model=model, scores=scores)


def project_sector_factor(fit: SectorFactorFit, panel: AssetPanel, sector: str, factor_name: str, periods) -> np.ndarray:
    """Scores for new periods under an existing fit, using the fit's standardization."""
    periods = [str(p) for p in periods]
    X, assets = factor_matrix(panel, sector, factor_name, periods)
    frame = pd.DataFrame(X, index=assets, columns=periods).reindex(list(fit.assets))
    Z = (frame.to_numpy(dtype=float) - fit.means[:, None]) / fit.sds[:, None]
    out = np.zeros(len(periods))
    seen = ~np.isnan(Z).all(axis=0)
    if seen.any():
        out[seen] = ppca_scores(fit.model, Z[:, seen])[0]
    return out


def sector_factor(panel: AssetPanel, sector: str, factor_name: str, window=None) -> np.ndarray:
    """
    First PPCA component of a characteristic across the sector's assets.

    Each asset is standardized over its observed entries before the fit.
    `window` is the list of periods to use; None means every period.
    Periods where no member reported the characteristic score 0.
    """
    periods = panel.periods if window is None else list(window)
    return fit_sector_factor(panel, sector, factor_name, periods).scores


@dataclass
class WindowedFactors:
    """
    Factor source for the rolling schedule.

    mode "window" refits each factor on the training periods only and projects
    later periods through that fit. mode "full" fits once on every period and
    slices, which looks ahead and exists for comparison runs.
    """

    panel: AssetPanel
    sector: str
    factor_names: tuple[str, ...]
    mode: str = "window"
    _full: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.mode not in ("window", "full"):
            raise DataValidationError(f"unknown factor_fit mode {self.mode!r}", code=error_codes.CONFIG_INVALID)

    def _full_scores(self, name: str) -> np.ndarray | None:
        if name not in self._full:
            try:
                self._full[name] = sector_factor(self.panel, self.sector, name)
            except (FactorUnavailableError, DataValidationError) as e:
                log_event("factor_unavailable", sector_id=self.sector, factor=name, reason=str(e))
                self._full[name] = None
        return self._full[name]

    def __call__(self, train_periods, score_periods) -> tuple[np.ndarray, tuple[str, ...]]:
        """Score matrix (len(score_periods) × P') and the factor names that were available."""
        score_periods = [str(p) for p in score_periods]
        columns, names = [], []
        if self.mode == "full":
            all_periods = self.panel.periods
            rows = [all_periods.index(p) for p in score_periods]
            for name in self.factor_names:
                scores = self._full_scores(name)
                if scores is not None:
                    columns.append(scores[rows])
                    names.append(name)
        else:
            train = [str(p) for p in train_periods]
            later = [p for p in score_periods if p not in set(train)]
            for name in self.factor_names:
                try:
                    fit = fit_sector_factor(self.panel, self.sector, name, train)
                except (FactorUnavailableError, DataValidationError) as e:
                    log_event("factor_unavailable", sector_id=self.sector, factor=name, reason=str(e))
                    continue
                by_period = dict(zip(train, fit.scores))
                if later:
                    by_period.update(zip(later, project_sector_factor(fit, self.panel, self.sector, name, later)))
                columns.append(np.array([by_period[p] for p in score_periods]))
                names.append(name)
        if not columns:
            return np.zeros((len(score_periods), 0)), ()
        return np.column_stack(columns), tuple(names)


def build_sector_panels(
    panel: AssetPanel,
    *,
    factor_names=None,
    min_assets: int = 1,
) -> dict[str, SectorPanel]:
    """
    One SectorPanel per sector over the sector's own span of periods, with
    full-sample factor scores. Factors unavailable in a sector are dropped
    from that sector's panel.
    """
    eq = sector_returns(panel, "equal").returns
    cap = sector_returns(panel, "cap").returns
    names = list(factor_names) if factor_names is not None else panel.factor_names
    counts = panel.observations.groupby("sector_code")["asset_id"].nunique()
    out: dict[str, SectorPanel] = {}
    for sector in eq.columns:
        if counts.get(sector, 0) < min_assets:
            continue
        series_eq = eq[sector].dropna()
        periods = list(series_eq.index)
        series_cap = cap[sector].reindex(periods)
        columns, kept = [], []
        for name in names:
            try:
                columns.append(sector_factor(panel, sector, name, periods))
                kept.append(name)
            except (FactorUnavailableError, DataValidationError) as e:
                log_event("factor_unavailable", sector_id=sector, factor=name, reason=str(e))
        factors = np.column_stack(columns) if columns else np.zeros((len(periods), 0))
        out[str(sector)] = SectorPanel(
            sector_id=str(sector),
            period_ids=tuple(periods),
            returns_eq=series_eq.to_numpy(),
            returns_cap=series_cap.fillna(series_eq).to_numpy(),
            factor_names=tuple(kept),
            factors=factors,
        )
        log_event("sector_panel_built", sector_id=str(sector), periods=len(periods), factors=len(kept))
    return out
