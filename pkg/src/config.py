"""
Run configuration.

The config file is flat `key = value` text read with python-dotenv. List
values are comma separated. CLI flags override file values.
"""
from __future__ import annotations

import os
from pathlib import Path
from typing import Literal

from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from src import error_codes
from src.cache_utils import compute_config_hash
from src.errors import DataValidationError
from src.forecasters import ForecasterSpec
from src.portfolio import QuantileScheme
from src.schedule import RollingSchedule
from src.synthetic import SyntheticSpec
from src.weights import DEFAULT_ETA_GRID, EtaPolicy, EvictionPolicy

DEFAULT_OUT_DIR = "artifacts/run"
OUT_DIR_ENV = "SECTOR_ENSEMBLE_OUT"

PATH_KEYS = ("asset_file", "factor_values_file", "factor_returns_file")
# keys that do not change any output byte
UNHASHED_KEYS = {"out_dir", "workers"}


def _split(value):
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return value


class RunConfig(BaseModel):
    seed: int = Field(ge=0, lt=2**64)
    out_dir: Path = Path(DEFAULT_OUT_DIR)

    asset_file: Path | None = None
    factor_values_file: Path | None = None
    factor_returns_file: Path | None = None
    external_predictions: list[Path] = Field(default_factory=list)

    weighting: Literal["equal", "cap"] = "equal"
    factor_fit: Literal["window", "full"] = "window"
    forecasters: list[str] = Field(default_factory=lambda: ["ols", "lasso", "pcr"])
    cv_folds: int = Field(default=5, ge=2)
    train_length: int = Field(default=360, ge=24)
    refit_every: int = Field(default=12, ge=1)
    window_kind: Literal["rolling", "expanding"] = "rolling"

    eta_policy: Literal["fixed", "cor3", "cor5", "feasible"] = "feasible"
    eta: float = Field(default=0.5, gt=0.0, le=0.5)
    eta_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_ETA_GRID))
    lookback: int = Field(default=12, ge=1)
    warm_start: bool = True
    min_obs: int = Field(default=12, ge=1)
    sigma2_window: int | None = Field(default=None, ge=1)
    eviction: Literal["off", "naive_streak", "clip_mass"] = "off"
    eviction_window: int = Field(default=24, ge=1)
    clip_mass_rate: float = Field(default=0.5, gt=0.0)
    ensemble_exclude: list[str] = Field(default_factory=list)
    ridge_jitter: bool = False

    scheme: list[int] | None = None
    costs: list[float] = Field(default_factory=lambda: [5.0, 10.0, 15.0])
    cost_mode: Literal["linear", "per_point"] = "linear"
    nw_lags: int | None = Field(default=None, ge=0)
    recent_start: str | None = None
    recent_end: str | None = None
    split_period: str | None = None

    synth_sectors: int = Field(default=6, ge=1)
    synth_factors: int = Field(default=3, ge=1)
    synth_models: int = Field(default=3, ge=1)
    synth_months: int = Field(default=480, ge=2)
    synth_snr: float = Field(default=0.05, gt=0.0)
    synth_regimes: list[tuple[int, int]] = Field(default_factory=lambda: [(0, 0)])
    synth_assets: int = Field(default=8, ge=2)
    synth_missing: float = Field(default=0.1, ge=0.0, lt=1.0)

    workers: int = Field(default=1, ge=1)

    @field_validator("external_predictions", "forecasters", "eta_grid", "ensemble_exclude", "costs", mode="before")
    @classmethod
    def _lists(cls, value):
        return _split(value)

    @field_validator("scheme", mode="before")
    @classmethod
    def _scheme(cls, value):
        value = _split(value)
        return value or None

    @field_validator("synth_regimes", mode="before")
    @classmethod
    def _regimes(cls, value):
        # "0:0, 240:1" -> [(0, 0), (240, 1)]
        if isinstance(value, str):
            return [tuple(int(x) for x in part.split(":")) for part in _split(value)]
        return value

    @field_validator("sigma2_window", "nw_lags", "recent_start", "recent_end", "split_period", mode="before")
    @classmethod
    def _blank_is_none(cls, value):
        return None if value == "" else value

    @field_validator("costs")
    @classmethod
    def _costs(cls, value):
        if any(c < 0 for c in value):
            raise ValueError("cost levels must be nonnegative")
        return value

    @model_validator(mode="after")
    def _check(self):
        if self.asset_file is not None and self.factor_values_file is None:
            raise ValueError("asset_file needs factor_values_file")
        return self

    # --- derived objects ---

    @property
    def eta_settings(self) -> EtaPolicy:
        return EtaPolicy(
            kind=self.eta_policy,
            eta=self.eta,
            grid=self.eta_grid,
            lookback=self.lookback,
            warm_start=self.warm_start,
        )

    @property
    def eviction_settings(self) -> EvictionPolicy:
        return EvictionPolicy(
            kind=self.eviction,
            window=self.eviction_window,
            streak=self.eviction_window,
            clip_mass_rate=self.clip_mass_rate,
        )

    @property
    def schedule(self) -> RollingSchedule:
        return RollingSchedule(
            train_length=self.train_length, refit_every=self.refit_every, window_kind=self.window_kind
        )

    @property
    def forecaster_specs(self) -> list[ForecasterSpec]:
        return [ForecasterSpec(kind=name, name=name, cv_folds=self.cv_folds) for name in self.forecasters]

    @property
    def quantile_scheme(self) -> QuantileScheme | None:
        return QuantileScheme(sizes=self.scheme) if self.scheme else None

    @property
    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            n_sectors=self.synth_sectors,
            n_factors=self.synth_factors,
            n_models=self.synth_models,
            n_months=self.synth_months,
            snr=self.synth_snr,
            regimes=self.synth_regimes,
            seed=self.seed,
            assets_per_sector=self.synth_assets,
            missing_rate=self.synth_missing,
        )

    @property
    def uses_synthetic(self) -> bool:
        return self.asset_file is None

    def hash_payload(self) -> dict:
        return self.model_dump(mode="json", exclude=UNHASHED_KEYS)

    @property
    def config_hash(self) -> str:
        return compute_config_hash(self.hash_payload())


def _parse_file(path: Path) -> dict:
    if not path.exists():
        raise DataValidationError(f"config file not found: {path}", code=error_codes.FILE_NOT_FOUND)
    raw = dotenv_values(path)
    return {k.strip().lower(): v for k, v in raw.items() if v is not None}


def check_paths(config: RunConfig) -> None:
    """Every referenced input file must exist."""
    paths = [getattr(config, key) for key in PATH_KEYS] + list(config.external_predictions)
    for path in paths:
        if path is not None and not Path(path).exists():
            raise DataValidationError(f"input file not found: {path}", code=error_codes.FILE_NOT_FOUND)


def load_config(path: str | Path | None = None, overrides: dict | None = None, *, check_files: bool = True) -> RunConfig:
    """
    Config from an optional file plus overrides (None values ignored).

    The output directory defaults to $SECTOR_ENSEMBLE_OUT when set.
    """
    values: dict = {}
    if os.environ.get(OUT_DIR_ENV):
        values["out_dir"] = os.environ[OUT_DIR_ENV]
    if path is not None:
        values.update(_parse_file(Path(path)))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "seed" not in values:
        raise DataValidationError("seed is required", code=error_codes.CONFIG_INVALID)
    try:
        config = RunConfig(**values)
    except ValidationError as e:
        raise DataValidationError(f"invalid config: {e.errors()[0]['loc']}: {e.errors()[0]['msg']}") from e
    if check_files:
        check_paths(config)
    return config
