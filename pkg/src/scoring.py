"""Forecast combination and the out-of-sample R² objective.

Pure functions, no I/O.
"""
from __future__ import annotations

import numpy as np

from src import error_codes
from src.errors import DimensionMismatchError, NumericalError
from src.schemas import PredictionPanel, WeightDistribution, check_finite


def combine(forecasts_t, p: WeightDistribution) -> float:
    """Weighted combination r̃_t = r̂_tᵀ p of one period's model forecasts."""
    r_hat = np.asarray(forecasts_t, dtype=float)
    if r_hat.shape != p.p.shape:
        raise DimensionMismatchError(f"{r_hat.size} forecasts for {p.p.size} weights")
    check_finite(r_hat, "forecasts")
    return float(r_hat @ p.p)


def r2_oos(realized, predicted) -> float:
    """
    Out-of-sample R² against the zero forecast.

    1 - Σ(r - r̂)² / Σ r². The denominator is NOT demeaned: the benchmark is
    r̂ = 0, not the sample mean.
    """
    r = np.asarray(realized, dtype=float)
    r_hat = np.asarray(predicted, dtype=float)
    if r.shape != r_hat.shape or r.ndim != 1 or r.size == 0:
        raise DimensionMismatchError("realized and predicted must be equal-length nonempty vectors")
    check_finite(r, "realized")
    check_finite(r_hat, "predicted")
    denom = float(r @ r)
    if denom <= 0.0:
        raise NumericalError("R² is undefined for an all-zero realized series", code=error_codes.UNDEFINED_R2)
    resid = r - r_hat
    return 1.0 - float(resid @ resid) / denom


def simple_average(panel: PredictionPanel) -> np.ndarray:
    """Equal-weight ensemble over the models available in each period."""
    avail = panel.available
    counts = avail.sum(axis=1)
    if np.any(counts == 0):
        raise DimensionMismatchError("a period has no available model")
    return np.where(avail, panel.forecasts, 0.0).sum(axis=1) / counts


def r2_table(panel: PredictionPanel) -> dict[str, float]:
    """
    R²_oos per model over the periods where that model is available,
    plus the simple-average ensemble under the key 'simple_average'.
    """
    table: dict[str, float] = {}
    for j, model_id in enumerate(panel.model_ids):
        rows = panel.available[:, j]
        table[model_id] = r2_oos(panel.realized[rows], panel.forecasts[rows, j]) if rows.any() else float("nan")
    table["simple_average"] = r2_oos(panel.realized, simple_average(panel))
    return table
