"""
Rolling-window forecasting schedule.

Row j of a SectorPanel holds the return realized in period j and the factor
scores known at the end of period j, so the forecast of r_j uses z_{j-1}.
At each refit date s every spec is fitted on the training pairs
(z_{j-1}, r_j) for j < s, then forecasts r_s .. r_{s+refit_every-1}.
"""
from __future__ import annotations

from typing import Callable, Literal

import numpy as np
from pydantic import BaseModel, Field

from src import error_codes
from src.errors import EnsembleError, InsufficientHistoryError
from src.forecasters import ForecasterSpec, make_forecaster
from src.logging_utils import log_event
from src.schemas import PredictionPanel, SectorPanel

# (train_periods, score_periods) -> (scores len(score_periods)×P, factor names)
FactorSource = Callable[[tuple, tuple], tuple[np.ndarray, tuple[str, ...]]]


class RollingSchedule(BaseModel):
    train_length: int = Field(default=360, ge=24)
    refit_every: int = Field(default=12, ge=1)
    window_kind: Literal["rolling", "expanding"] = "rolling"
    horizon: Literal[1] = 1


def refit_dates(n_periods: int, schedule: RollingSchedule) -> list[int]:
    """Row indices of the first target of each test block."""
    first = schedule.train_length + 1
    if n_periods <= first:
        raise InsufficientHistoryError(
            f"{n_periods} periods, need more than {first} for one window", code=error_codes.INSUFFICIENT_HISTORY
        )
    return list(range(first, n_periods, schedule.refit_every))


def _train_targets(s: int, schedule: RollingSchedule) -> np.ndarray:
    start = 1 if schedule.window_kind == "expanding" else s - schedule.train_length
    return np.arange(max(start, 1), s)


def _columns(names: tuple[str, ...], spec: ForecasterSpec) -> list[int]:
    if spec.features is None:
        return list(range(len(names)))
    return [names.index(f) for f in spec.features if f in names]


def run_schedule(
    sector_panel: SectorPanel,
    specs: list[ForecasterSpec],
    schedule: RollingSchedule | None = None,
    *,
    weighting: str = "equal",
    factor_source: FactorSource | None = None,
) -> PredictionPanel:
    """
    Out-of-sample forecasts of every spec over the test periods.

    A spec that fails on a window is marked unavailable for that window's
    periods and logged; the other specs are unaffected.
    """
    schedule = schedule or RollingSchedule()
    specs = [s for s in specs if s.kind != "external"]
    if not specs:
        raise EnsembleError("no fittable forecaster specs", code=error_codes.CONFIG_INVALID)
    r = sector_panel.returns(weighting)
    periods = sector_panel.period_ids
    n = len(periods)
    dates = refit_dates(n, schedule)
    first = dates[0]

    forecasts = np.zeros((n - first, len(specs)))
    available = np.zeros((n - first, len(specs)), dtype=bool)
    for s in dates:
        train_j = _train_targets(s, schedule)
        test_j = np.arange(s, min(s + schedule.refit_every, n))
        if factor_source is None:
            z_train = sector_panel.factors[train_j - 1]
            z_test = sector_panel.factors[test_j - 1]
            names = sector_panel.factor_names
        else:
            rows = np.arange(train_j[0] - 1, test_j[-1])
            train_periods = tuple(periods[i] for i in range(train_j[0] - 1, s))
            scores, names = factor_source(train_periods, tuple(periods[i] for i in rows))
            offset = rows[0]
            z_train = scores[train_j - 1 - offset]
            z_test = scores[test_j - 1 - offset]
        out_rows = test_j - first
        for k, spec in enumerate(specs):
            cols = _columns(names, spec)
            try:
                model = make_forecaster(spec).fit(z_train[:, cols], r[train_j])
                pred = model.predict(z_test[:, cols])
                if not np.all(np.isfinite(pred)):
                    raise EnsembleError("non-finite forecast", code=error_codes.NON_FINITE)
            except (EnsembleError, ValueError, np.linalg.LinAlgError) as e:
                log_event(
                    "spec_window_failed",
                    code=error_codes.SPEC_FAILED,
                    sector_id=sector_panel.sector_id,
                    model_id=spec.model_id,
                    refit_period=periods[s],
                    reason=str(e),
                )
                continue
            forecasts[out_rows, k] = pred
            available[out_rows, k] = True
        log_event(
            "window_fitted",
            sector_id=sector_panel.sector_id,
            refit_period=periods[s],
            train_rows=int(train_j.size),
            test_rows=int(test_j.size),
        )

    return PredictionPanel(
        forecasts=forecasts,
        realized=r[first:],
        model_ids=tuple(s.model_id for s in specs),
        period_ids=periods[first:],
        sector_id=sector_panel.sector_id,
        available=available,
    )
