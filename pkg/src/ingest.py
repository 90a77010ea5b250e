"""
Delimited-text ingestion with row-numbered validation errors.

Row numbers in messages count data records from 1 (header and comment lines
excluded).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from src import error_codes
from src.errors import DataValidationError
from src.schemas import AssetPanel, PredictionPanel, SectorPanel

ASSET_COLUMNS = ("period", "asset_id", "ret", "market_cap", "sector_code")
FACTOR_VALUE_COLUMNS = ("period", "asset_id", "factor_name", "value")
FACTOR_RETURN_COLUMNS = ("period",)
PREDICTION_COLUMNS = ("period", "sector_id", "model_id", "forecast", "realized")
SECTOR_PANEL_COLUMNS = ("period", "ret_eq", "ret_cap")


def read_table(path: str | Path, required: tuple[str, ...], *, text_columns: tuple[str, ...] = ()) -> pd.DataFrame:
    """Read a comma-separated file, skipping '#' comment lines, and check its header."""
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"file not found: {path}", code=error_codes.FILE_NOT_FOUND)
    dtype = {c: str for c in ("period", *text_columns)}
    try:
        frame = pd.read_csv(path, comment="#", dtype=dtype, keep_default_na=True)
    except pd.errors.EmptyDataError as e:
        raise DataValidationError(
            f"{path.name} is empty; expected header {','.join(required)}", code=error_codes.MISSING_HEADER
        ) from e
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataValidationError(
            f"{path.name} is missing header columns {missing}; expected {','.join(required)}",
            code=error_codes.MISSING_HEADER,
        )
    if "period" in frame.columns:
        frame["period"] = normalize_periods(frame["period"], path.name)
    return frame


def normalize_periods(values: pd.Series, where: str = "") -> pd.Series:
    """ISO-8601 month stamps 'YYYY-MM'; anything finer than a month is truncated."""
    out = []
    for i, value in enumerate(values, start=1):
        try:
            period = pd.Period(str(value).strip(), freq="M")
            if period is pd.NaT:
                raise ValueError("missing period")
            out.append(str(period))
        except (ValueError, TypeError) as e:
            raise DataValidationError(
                f"{where} row {i}: not an ISO-8601 month: {value!r}", code=error_codes.BAD_PERIOD
            ) from e
    return pd.Series(out, index=values.index, dtype=object)


def _check_duplicates(frame: pd.DataFrame, keys: list[str], where: str) -> None:
    dup = frame.duplicated(keys, keep=False)
    if dup.any():
        first = frame.loc[dup, keys].iloc[0].tolist()
        same = (frame[keys] == frame.loc[dup, keys].iloc[0]).all(axis=1)
        rows = (np.flatnonzero(same.to_numpy()) + 1).tolist()
        raise DataValidationError(
            f"{where}: duplicate key {first} at rows {rows[0]} and {rows[1]}", code=error_codes.DUPLICATE_KEY
        )


def _check_finite(frame: pd.DataFrame, columns: list[str], where: str, *, allow_missing: bool = False) -> None:
    for column in columns:
        values = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=float)
        bad = ~np.isfinite(values)
        if allow_missing:
            raw_missing = frame[column].isna().to_numpy()
            bad &= ~raw_missing
        if bad.any():
            row = int(np.flatnonzero(bad)[0]) + 1
            raise DataValidationError(
                f"{where} row {row}: non-finite {column} {frame[column].iloc[row - 1]!r}", code=error_codes.NON_FINITE
            )
        frame[column] = values


def load_asset_panel(returns_path: str | Path, factor_values_path: str | Path) -> AssetPanel:
    obs = read_table(returns_path, ASSET_COLUMNS, text_columns=("asset_id", "sector_code"))
    where = Path(returns_path).name
    _check_duplicates(obs, ["period", "asset_id"], where)
    _check_finite(obs, ["ret", "market_cap"], where)
    if obs["sector_code"].isna().any():
        row = int(np.flatnonzero(obs["sector_code"].isna().to_numpy())[0]) + 1
        raise DataValidationError(f"{where} row {row}: missing sector_code", code=error_codes.EMPTY_SECTOR)

    fac = read_table(factor_values_path, FACTOR_VALUE_COLUMNS, text_columns=("asset_id", "factor_name"))
    where = Path(factor_values_path).name
    _check_duplicates(fac, ["period", "asset_id", "factor_name"], where)
    _check_finite(fac, ["value"], where, allow_missing=True)
    return AssetPanel(observations=obs, factor_values=fac)


def load_factor_returns(path: str | Path) -> pd.DataFrame:
    """Factor return table indexed by period (columns such as mkt, smb, hml, mom, rf)."""
    frame = read_table(path, FACTOR_RETURN_COLUMNS)
    where = Path(path).name
    _check_duplicates(frame, ["period"], where)
    columns = [c for c in frame.columns if c != "period"]
    _check_finite(frame, columns, where)
    return frame.set_index("period").sort_index()


def load_predictions(path: str | Path) -> dict[str, PredictionPanel]:
    """
    One PredictionPanel per sector from a long file (period, sector_id,
    model_id, forecast, realized). Models missing in a period are marked
    unavailable there.
    """
    frame = read_table(path, PREDICTION_COLUMNS, text_columns=("sector_id", "model_id"))
    where = Path(path).name
    _check_duplicates(frame, ["period", "sector_id", "model_id"], where)
    _check_finite(frame, ["forecast", "realized"], where)
    panels = {}
    for sector, group in frame.groupby("sector_id", sort=True):
        realized = group.groupby("period")["realized"]
        if (realized.max() - realized.min()).abs().max() > 1e-12:
            raise DataValidationError(
                f"{where}: realized returns disagree across models for sector {sector}", code=error_codes.MISALIGNED
            )
        wide = group.pivot(index="period", columns="model_id", values="forecast").sort_index()
        panels[str(sector)] = PredictionPanel(
            forecasts=wide.fillna(0.0).to_numpy(),
            realized=realized.first().reindex(wide.index).to_numpy(),
            model_ids=tuple(str(m) for m in wide.columns),
            period_ids=tuple(wide.index),
            sector_id=str(sector),
            available=wide.notna().to_numpy(),
        )
    return panels


def load_sector_panel(path: str | Path, sector_id: str | None = None) -> SectorPanel:
    """SectorPanel from its delimited file; the sector id defaults to the file stem after 'sector_'."""
    path = Path(path)
    frame = read_table(path, SECTOR_PANEL_COLUMNS)
    where = path.name
    _check_duplicates(frame, ["period"], where)
    factor_names = [c for c in frame.columns if c not in SECTOR_PANEL_COLUMNS]
    _check_finite(frame, ["ret_eq", "ret_cap", *factor_names], where)
    frame = frame.sort_values("period")
    return SectorPanel(
        sector_id=sector_id or path.stem.removeprefix("sector_"),
        period_ids=tuple(frame["period"]),
        returns_eq=frame["ret_eq"].to_numpy(),
        returns_cap=frame["ret_cap"].to_numpy(),
        factor_names=tuple(factor_names),
        factors=frame[factor_names].to_numpy() if factor_names else np.zeros((len(frame), 0)),
    )


def load_state(path: str | Path) -> list[dict]:
    """Snapshot records written by the ensemble stage."""
    frame = read_table(path, ("model_id", "w", "log_w", "evicted", "t", "eta_policy", "eta", "lookback", "grid"),
                       text_columns=("model_id", "grid"))
    return frame.to_dict(orient="records")
