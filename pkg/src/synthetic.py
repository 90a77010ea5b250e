"""
Seeded synthetic data.

generate_synthetic builds an asset panel whose sector returns follow an
additive prediction-error model r_{t+1} = g(z_t) + ε with AR(1) sector
factors. synthetic_prediction_panel builds a forecast stream directly, with a
planted best model per regime, for ensemble experiments.

All randomness flows from the seed through named Philox streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator

from src.cache_utils import named_rng
from src.schemas import AssetPanel, PredictionPanel

FACTOR_AR = 0.9
CHARACTERISTIC_NOISE = 0.3


class SyntheticSpec(BaseModel):
    n_sectors: int = Field(default=6, ge=1)
    n_factors: int = Field(default=3, ge=1)
    n_models: int = Field(default=3, ge=1)
    n_months: int = Field(default=480, ge=2)
    snr: float = Field(default=0.05, gt=0.0)
    # (first month index, index of the best factor or model from then on)
    regimes: list[tuple[int, int]] = Field(default_factory=lambda: [(0, 0)])
    seed: int = Field(ge=0, lt=2**64)
    assets_per_sector: int = Field(default=8, ge=2)
    missing_rate: float = Field(default=0.1, ge=0.0, lt=1.0)
    start_period: str = "1990-01"
    return_scale: float = Field(default=0.05, gt=0.0)

    @field_validator("regimes")
    @classmethod
    def _regimes(cls, regimes):
        if not regimes:
            raise ValueError("at least one regime is required")
        starts = [s for s, _ in regimes]
        if starts[0] != 0 or starts != sorted(set(starts)):
            raise ValueError("regime starts must begin at 0 and strictly increase")
        if any(b < 0 for _, b in regimes):
            raise ValueError("regime indices must be nonnegative")
        return [(int(s), int(b)) for s, b in regimes]


def regime_schedule(regimes: list[tuple[int, int]], n: int) -> np.ndarray:
    """Active regime index per period."""
    out = np.empty(n, dtype=int)
    for i, (start, best) in enumerate(regimes):
        stop = regimes[i + 1][0] if i + 1 < len(regimes) else n
        out[start:stop] = best
    return out


@dataclass(frozen=True)
class GroundTruth:
    """What generated the data: active factor per period, true conditional means and factors."""

    periods: tuple[str, ...]
    best: np.ndarray
    expected: dict[str, np.ndarray]
    factors: dict[str, np.ndarray]
    noise_sd: float
    extra: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for sector, mu in self.expected.items():
            for t, period in enumerate(self.periods):
                rows.append({"period": period, "sector_id": sector, "expected": mu[t], "best": int(self.best[t])})
        return pd.DataFrame(rows)


@dataclass(frozen=True)
class SyntheticData:
    panel: AssetPanel
    factor_returns: pd.DataFrame
    truth: GroundTruth


def _periods(start: str, n: int) -> list[str]:
    return [str(p) for p in pd.period_range(start=start, periods=n, freq="M")]


def _ar1(rng: np.random.Generator, n: int, size: int, phi: float = FACTOR_AR) -> np.ndarray:
    """Unit-variance stationary AR(1) paths, one per column."""
    out = np.empty((n, size))
    out[0] = rng.standard_normal(size)
    scale = math.sqrt(1.0 - phi * phi)
    shocks = rng.standard_normal((n, size))
    for t in range(1, n):
        out[t] = phi * out[t - 1] + scale * shocks[t]
    return out


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """
    Asset panel, factor returns and ground truth for one seed.

    Sector i carries P unit-variance AR(1) factors z. The return of period
    t+1 is g(z_t) + ε where g loads only on the factor active in that
    period's regime, scaled so var(g)/var(ε) = snr. Asset returns scatter
    around the sector return with deviations that sum to zero, so the
    equal-weighted sector return is exactly the sector return. Each asset's
    characteristic p is a noisy multiple of factor p, missing at random.
    """
    n, k, P = spec.n_months, spec.assets_per_sector, spec.n_factors
    periods = _periods(spec.start_period, n)
    best = regime_schedule(spec.regimes, n) % P
    signal_sd = spec.return_scale * math.sqrt(spec.snr / (1.0 + spec.snr))
    noise_sd = spec.return_scale / math.sqrt(1.0 + spec.snr)

    rng_factor = named_rng(spec.seed, "sector_factors")
    rng_noise = named_rng(spec.seed, "return_noise")
    rng_asset = named_rng(spec.seed, "asset_dispersion")
    rng_cap = named_rng(spec.seed, "market_caps")
    rng_char = named_rng(spec.seed, "characteristics")
    rng_missing = named_rng(spec.seed, "missing")
    rng_style = named_rng(spec.seed, "style_factors")

    obs_frames, fac_frames = [], []
    expected: dict[str, np.ndarray] = {}
    factors: dict[str, np.ndarray] = {}
    sector_r = np.empty((n, spec.n_sectors))
    for i in range(spec.n_sectors):
        sector = f"{10 + i:02d}"
        z = _ar1(rng_factor, n, P)
        mu = np.zeros(n)
        mu[1:] = signal_sd * z[np.arange(n - 1), best[1:]]
        r = mu + noise_sd * rng_noise.standard_normal(n)
        sector_r[:, i] = r
        expected[sector] = mu
        factors[sector] = z

        dispersion = 0.5 * spec.return_scale * rng_asset.standard_normal((n, k))
        dispersion -= dispersion.mean(axis=1, keepdims=True)
        asset_r = r[:, None] + dispersion
        caps = np.exp(
            np.log(1e3) + rng_cap.standard_normal(k)[None, :] + np.cumsum(np.log1p(asset_r), axis=0)
        )
        assets = [f"{sector}-{a:03d}" for a in range(k)]
        obs_frames.append(
            pd.DataFrame(
                {
                    "period": np.repeat(periods, k),
                    "asset_id": np.tile(assets, n),
                    "ret": asset_r.ravel(),
                    "market_cap": caps.ravel(),
                    "sector_code": sector,
                }
            )
        )
        loadings = 0.5 + rng_char.random((P, k))
        for p in range(P):
            values = z[:, p : p + 1] * loadings[p][None, :] + CHARACTERISTIC_NOISE * rng_char.standard_normal((n, k))
            values[rng_missing.random((n, k)) < spec.missing_rate] = np.nan
            fac_frames.append(
                pd.DataFrame(
                    {
                        "period": np.repeat(periods, k),
                        "asset_id": np.tile(assets, n),
                        "factor_name": f"f{p + 1}",
                        "value": values.ravel(),
                    }
                )
            )

    panel = AssetPanel(
        observations=pd.concat(obs_frames, ignore_index=True),
        factor_values=pd.concat(fac_frames, ignore_index=True),
    )
    style = 0.03 * rng_style.standard_normal((n, 3))
    factor_returns = pd.DataFrame(
        {
            "mkt": sector_r.mean(axis=1) + 0.01 * rng_style.standard_normal(n),
            "smb": style[:, 0],
            "hml": style[:, 1],
            "mom": style[:, 2],
            "rf": np.full(n, 0.001),
        },
        index=pd.Index(periods, name="period"),
    )
    truth = GroundTruth(
        periods=tuple(periods), best=best, expected=expected, factors=factors, noise_sd=noise_sd
    )
    return SyntheticData(panel=panel, factor_returns=factor_returns, truth=truth)


def synthetic_prediction_panel(
    n_models: int,
    n_periods: int,
    *,
    seed: int,
    regimes: list[tuple[int, int]] | None = None,
    snr: float = 0.25,
    signal_ar: float = 0.0,
    good_error: float = 0.3,
    bad_error: float = 2.5,
    return_scale: float = 0.05,
    sector_id: str = "synthetic",
) -> tuple[PredictionPanel, GroundTruth]:
    """
    Forecast stream with a planted best model per regime.

    r_t = μ_t + ε_t with var(μ)/var(ε) = snr. The model that is best in a
    period forecasts μ_t plus an error of `good_error` signal SDs; every other
    model errs by `bad_error` signal SDs. signal_ar = 0 makes μ iid.
    """
    regimes = regimes or [(0, 0)]
    best = regime_schedule(regimes, n_periods) % n_models
    signal_sd = return_scale * math.sqrt(snr / (1.0 + snr))
    noise_sd = return_scale / math.sqrt(1.0 + snr)
    mu = signal_sd * _ar1(named_rng(seed, "panel_signal"), n_periods, 1, phi=signal_ar)[:, 0]
    realized = mu + noise_sd * named_rng(seed, "panel_noise").standard_normal(n_periods)
    errors = named_rng(seed, "panel_model_errors").standard_normal((n_periods, n_models))
    scale = np.full((n_periods, n_models), bad_error)
    scale[np.arange(n_periods), best] = good_error
    forecasts = mu[:, None] + signal_sd * scale * errors
    periods = _periods("1990-01", n_periods)
    panel = PredictionPanel(
        forecasts=forecasts,
        realized=realized,
        model_ids=tuple(f"model_{j}" for j in range(n_models)),
        period_ids=tuple(periods),
        sector_id=sector_id,
    )
    truth = GroundTruth(
        periods=tuple(periods),
        best=best,
        expected={sector_id: mu},
        factors={},
        noise_sd=noise_sd,
    )
    return panel, truth
