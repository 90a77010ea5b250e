"""Domain types shared by every module.

Numeric containers are frozen dataclasses over read-only numpy arrays; they
validate on construction and are safe to share across threads. Returns are
plain decimals (0.01 = 1%) everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from src import error_codes
from src.errors import DataValidationError, DimensionMismatchError

SIMPLEX_TOL = 1e-12


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def normalize_period(value) -> str:
    """Return an ISO month stamp 'YYYY-MM' for anything pandas can read as a month."""
    try:
        period = pd.Period(str(value), freq="M")
        if period is pd.NaT:
            raise ValueError("missing period")
        return str(period)
    except (ValueError, TypeError) as e:
        raise DataValidationError(f"not an ISO-8601 month: {value!r}", code=error_codes.BAD_PERIOD) from e


def check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise DataValidationError(f"{what} contains non-finite values", code=error_codes.NON_FINITE)


def _check_increasing(period_ids: tuple[str, ...]) -> None:
    for a, b in zip(period_ids, period_ids[1:]):
        if not a < b:
            raise DataValidationError(
                f"period ids must be strictly increasing: {a} then {b}", code=error_codes.BAD_PERIOD
            )


@dataclass(frozen=True)
class WeightDistribution:
    """Ensemble weights on the probability simplex."""

    p: np.ndarray

    def __post_init__(self):
        p = _frozen(self.p)
        if p.ndim != 1 or p.size == 0:
            raise DimensionMismatchError("weight vector must be one-dimensional and nonempty")
        check_finite(p, "weights")
        if np.any(p < 0.0):
            raise DataValidationError("weights must be nonnegative", code=error_codes.INVALID_WEIGHTS)
        if abs(p.sum() - 1.0) > SIMPLEX_TOL:
            raise DataValidationError(
                f"weights must sum to 1, got {p.sum()!r}", code=error_codes.INVALID_WEIGHTS
            )
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, n: int) -> WeightDistribution:
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def from_weights(cls, w: np.ndarray, active: np.ndarray | None = None) -> WeightDistribution:
        """Normalize positive weights, giving inactive entries exactly zero mass."""
        w = np.asarray(w, dtype=float)
        mask = np.ones(w.shape, dtype=bool) if active is None else np.asarray(active, dtype=bool)
        p = np.where(mask, w, 0.0)
        total = p.sum()
        if not total > 0.0:
            raise DataValidationError("no active weight mass", code=error_codes.INVALID_WEIGHTS)
        p = p / total
        # one more pass pins the sum to 1 within a couple of ulps
        p = p / p.sum()
        return cls(p)

    def __len__(self) -> int:
        return self.p.size


@dataclass(frozen=True)
class GainVector:
    """Per-model gain for one period, with clipping bookkeeping."""

    m: np.ndarray
    clipped: np.ndarray | None = None
    clip_mass: np.ndarray | None = None

    def __post_init__(self):
        m = _frozen(self.m)
        n = m.size
        clipped = _frozen(np.zeros(n, dtype=bool) if self.clipped is None else self.clipped, bool)
        mass = _frozen(np.zeros(n) if self.clip_mass is None else self.clip_mass)
        if clipped.shape != m.shape or mass.shape != m.shape:
            raise DimensionMismatchError("gain flags must match gain length")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "clipped", clipped)
        object.__setattr__(self, "clip_mass", mass)

    @property
    def any_clipped(self) -> bool:
        return bool(self.clipped.any())


@dataclass(frozen=True)
class PredictionPanel:
    """
    One sector's forecast stream: τ periods by L models plus realized returns.

    `available` marks which model forecasts exist per period. Missing entries
    are stored as 0.0 so the forecast matrix stays finite; the ensemble treats
    an unavailable model as evicted for that period only.
    """

    forecasts: np.ndarray
    realized: np.ndarray
    model_ids: tuple[str, ...]
    period_ids: tuple[str, ...]
    sector_id: str = ""
    available: np.ndarray | None = None

    def __post_init__(self):
        forecasts = _frozen(self.forecasts)
        realized = _frozen(self.realized)
        model_ids = tuple(str(m) for m in self.model_ids)
        period_ids = tuple(str(p) for p in self.period_ids)
        if forecasts.ndim != 2:
            raise DimensionMismatchError("forecasts must be a τ×L matrix")
        tau, n_models = forecasts.shape
        if tau < 1 or n_models < 1:
            raise DimensionMismatchError("panel needs at least one period and one model")
        if realized.shape != (tau,):
            raise DimensionMismatchError(f"realized has shape {realized.shape}, expected ({tau},)")
        if len(model_ids) != n_models or len(set(model_ids)) != n_models:
            raise DimensionMismatchError("model_ids must be unique and match the forecast columns")
        if len(period_ids) != tau:
            raise DimensionMismatchError("period_ids must match the forecast rows")
        check_finite(forecasts, "forecasts")
        check_finite(realized, "realized")
        _check_increasing(period_ids)
        if self.available is None:
            available = _frozen(np.ones((tau, n_models), dtype=bool), bool)
        else:
            available = _frozen(self.available, bool)
            if available.shape != forecasts.shape:
                raise DimensionMismatchError("availability mask must match forecasts")
        object.__setattr__(self, "forecasts", forecasts)
        object.__setattr__(self, "realized", realized)
        object.__setattr__(self, "model_ids", model_ids)
        object.__setattr__(self, "period_ids", period_ids)
        object.__setattr__(self, "available", available)

    @property
    def periods(self) -> int:
        return self.forecasts.shape[0]

    @property
    def models(self) -> int:
        return self.forecasts.shape[1]

    @property
    def complete(self) -> bool:
        return bool(self.available.all())

    def select_models(self, model_ids) -> PredictionPanel:
        ids = list(model_ids)
        missing = [m for m in ids if m not in self.model_ids]
        if missing:
            raise DataValidationError(f"unknown models: {missing}", code=error_codes.MISALIGNED)
        cols = [self.model_ids.index(m) for m in ids]
        return PredictionPanel(
            forecasts=self.forecasts[:, cols],
            realized=self.realized,
            model_ids=tuple(ids),
            period_ids=self.period_ids,
            sector_id=self.sector_id,
            available=self.available[:, cols],
        )

    def slice_periods(self, start: int, stop: int | None = None) -> PredictionPanel:
        rows = slice(start, stop)
        return PredictionPanel(
            forecasts=self.forecasts[rows],
            realized=self.realized[rows],
            model_ids=self.model_ids,
            period_ids=self.period_ids[rows],
            sector_id=self.sector_id,
            available=self.available[rows],
        )

    def mask_rows(self, rows: np.ndarray) -> PredictionPanel:
        rows = np.asarray(rows, dtype=bool)
        return PredictionPanel(
            forecasts=self.forecasts[rows],
            realized=self.realized[rows],
            model_ids=self.model_ids,
            period_ids=tuple(p for p, keep in zip(self.period_ids, rows) if keep),
            sector_id=self.sector_id,
            available=self.available[rows],
        )


def merge_panels(panels: list[PredictionPanel]) -> PredictionPanel:
    """
    Join several panels of one sector on their common periods.

    Model ids must be disjoint and realized returns must agree on the
    shared periods.
    """
    if not panels:
        raise DataValidationError("nothing to merge", code=error_codes.MISALIGNED)
    if len(panels) == 1:
        return panels[0]
    common = sorted(set(panels[0].period_ids).intersection(*(p.period_ids for p in panels[1:])))
    if not common:
        raise DataValidationError("panels share no periods", code=error_codes.MISALIGNED)
    forecasts, available, model_ids = [], [], []
    realized = None
    for panel in panels:
        rows = [panel.period_ids.index(p) for p in common]
        r = panel.realized[rows]
        if realized is None:
            realized = r
        elif not np.allclose(realized, r, rtol=0.0, atol=1e-12):
            raise DataValidationError(
                f"realized returns disagree for sector {panel.sector_id!r}", code=error_codes.MISALIGNED
            )
        forecasts.append(panel.forecasts[rows])
        available.append(panel.available[rows])
        model_ids.extend(panel.model_ids)
    return PredictionPanel(
        forecasts=np.hstack(forecasts),
        realized=realized,
        model_ids=tuple(model_ids),
        period_ids=tuple(common),
        sector_id=panels[0].sector_id,
        available=np.hstack(available),
    )


@dataclass(frozen=True)
class EnsembleTrace:
    """
    Per-period record of one ensemble run over a PredictionPanel.

    Rows align with the panel's periods. Gain, σ̂² and η entries are NaN on
    warm-up periods where no update was applied (`scored` is False there).
    """

    period_ids: tuple[str, ...]
    model_ids: tuple[str, ...]
    combined: np.ndarray
    weights: np.ndarray
    raw_gains: np.ndarray
    clipped_gains: np.ndarray
    sigma2: np.ndarray
    eta: np.ndarray
    scored: np.ndarray
    flags: tuple[tuple[str, ...], ...]
    evicted: frozenset[str] = field(default_factory=frozenset)
    policy: str = ""

    def __post_init__(self):
        tau = len(self.period_ids)
        for name in ("combined", "weights", "raw_gains", "clipped_gains", "sigma2", "eta"):
            arr = _frozen(getattr(self, name))
            if arr.shape[0] != tau:
                raise DimensionMismatchError(f"trace field {name} does not have {tau} rows")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "scored", _frozen(self.scored, bool))
        if len(self.flags) != tau:
            raise DimensionMismatchError("one flag tuple per period is required")

    @property
    def steps(self) -> int:
        return int(self.scored.sum())


@dataclass(frozen=True)
class AssetPanel:
    """
    Long-format asset data.

    observations: period, asset_id, ret, market_cap, sector_code
    factor_values: period, asset_id, factor_name, value (value may be NaN)
    """

    observations: pd.DataFrame
    factor_values: pd.DataFrame

    OBS_COLUMNS = ("period", "asset_id", "ret", "market_cap", "sector_code")
    FACTOR_COLUMNS = ("period", "asset_id", "factor_name", "value")

    def __post_init__(self):
        obs = self.observations.copy()
        fac = self.factor_values.copy()
        for frame, cols, what in (
            (obs, self.OBS_COLUMNS, "observations"),
            (fac, self.FACTOR_COLUMNS, "factor_values"),
        ):
            missing = [c for c in cols if c not in frame.columns]
            if missing:
                raise DataValidationError(
                    f"{what} is missing columns {missing}", code=error_codes.MISSING_HEADER
                )
        obs = obs[list(self.OBS_COLUMNS)]
        fac = fac[list(self.FACTOR_COLUMNS)]
        obs["asset_id"] = obs["asset_id"].astype(str)
        obs["sector_code"] = obs["sector_code"].astype(str)
        fac["asset_id"] = fac["asset_id"].astype(str)
        fac["factor_name"] = fac["factor_name"].astype(str)
        if obs["sector_code"].isin(["", "nan", "None"]).any():
            raise DataValidationError("every return record needs a sector_code", code=error_codes.EMPTY_SECTOR)
        if obs.duplicated(["period", "asset_id"]).any():
            raise DataValidationError("duplicate (period, asset_id) observation", code=error_codes.DUPLICATE_KEY)
        if fac.duplicated(["period", "asset_id", "factor_name"]).any():
            raise DataValidationError("duplicate factor value record", code=error_codes.DUPLICATE_KEY)
        if (obs["market_cap"] < 0).any():
            raise DataValidationError("market caps must be nonnegative", code=error_codes.NON_FINITE)
        obs = obs.sort_values(["period", "asset_id"], kind="mergesort").reset_index(drop=True)
        fac = fac.sort_values(["period", "asset_id", "factor_name"], kind="mergesort").reset_index(drop=True)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "factor_values", fac)

    @property
    def periods(self) -> list[str]:
        return sorted(self.observations["period"].unique())

    @property
    def sectors(self) -> list[str]:
        return sorted(self.observations["sector_code"].unique())

    @property
    def factor_names(self) -> list[str]:
        return sorted(self.factor_values["factor_name"].unique())


@dataclass(frozen=True)
class SectorPanel:
    """
    One sector's aligned series: row t holds the return realized in period t
    and the factor scores z_t known at the end of period t.
    """

    sector_id: str
    period_ids: tuple[str, ...]
    returns_eq: np.ndarray
    returns_cap: np.ndarray
    factor_names: tuple[str, ...]
    factors: np.ndarray

    def __post_init__(self):
        period_ids = tuple(str(p) for p in self.period_ids)
        n = len(period_ids)
        returns_eq = _frozen(self.returns_eq)
        returns_cap = _frozen(self.returns_cap)
        factors = _frozen(np.asarray(self.factors, dtype=float).reshape(n, len(self.factor_names)))
        if returns_eq.shape != (n,) or returns_cap.shape != (n,):
            raise DimensionMismatchError("sector return series must align with periods")
        check_finite(returns_eq, "equal-weighted returns")
        check_finite(returns_cap, "cap-weighted returns")
        check_finite(factors, "sector factors")
        _check_increasing(period_ids)
        object.__setattr__(self, "period_ids", period_ids)
        object.__setattr__(self, "returns_eq", returns_eq)
        object.__setattr__(self, "returns_cap", returns_cap)
        object.__setattr__(self, "factor_names", tuple(self.factor_names))
        object.__setattr__(self, "factors", factors)

    def returns(self, weighting: str) -> np.ndarray:
        if weighting == "equal":
            return self.returns_eq
        if weighting == "cap":
            return self.returns_cap
        raise DataValidationError(f"unknown weighting {weighting!r}", code=error_codes.CONFIG_INVALID)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"period": list(self.period_ids), "ret_eq": self.returns_eq, "ret_cap": self.returns_cap})
        for j, name in enumerate(self.factor_names):
            frame[name] = self.factors[:, j]
        return frame
