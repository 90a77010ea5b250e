# tests/conftest.py
from __future__ import annotations

import numpy as np
import pytest

from src.schemas import PredictionPanel


@pytest.fixture(autouse=True)
def _isolate_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("SECTOR_ENSEMBLE_OUT", str(tmp_path / "run"))


def month_ids(n: int, start: str = "2000-01") -> tuple[str, ...]:
    year, month = (int(x) for x in start.split("-"))
    out = []
    for k in range(n):
        m = month - 1 + k
        out.append(f"{year + m // 12:04d}-{m % 12 + 1:02d}")
    return tuple(out)


def make_panel(forecasts, realized, *, sector_id: str = "s0", available=None, start: str = "2000-01") -> PredictionPanel:
    """
    Helper to build a PredictionPanel from plain lists.

    Model ids are m0..m{L-1}; periods are consecutive months from `start`.
    """
    forecasts = np.atleast_2d(np.asarray(forecasts, dtype=float))
    return PredictionPanel(
        forecasts=forecasts,
        realized=np.asarray(realized, dtype=float),
        model_ids=tuple(f"m{j}" for j in range(forecasts.shape[1])),
        period_ids=month_ids(forecasts.shape[0], start),
        sector_id=sector_id,
        available=available,
    )


def noisy_panel(tau: int = 120, *, seed: int = 0, noise=(0.01, 0.03, 0.05), sector_id: str = "s0") -> PredictionPanel:
    """Models are truth plus independent noise of increasing scale."""
    rng = np.random.default_rng(seed)
    truth = rng.normal(0.0, 0.02, tau)
    realized = truth + rng.normal(0.0, 0.01, tau)
    forecasts = np.column_stack([truth + rng.normal(0.0, s, tau) for s in noise])
    return make_panel(forecasts, realized, sector_id=sector_id)
