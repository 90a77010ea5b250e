# tests/test_schedule.py
import numpy as np
import pytest

from src import error_codes
from src.errors import EnsembleError, InsufficientHistoryError
from src.forecasters import ForecasterSpec
from src.schedule import RollingSchedule, refit_dates, run_schedule
from src.schemas import SectorPanel
from tests.conftest import month_ids

SCHEDULE = RollingSchedule(train_length=24, refit_every=12)


def _sector(n=60, seed=0):
    """r_j = 0.01 + 0.02 z_{j-1} exactly."""
    rng = np.random.default_rng(seed)
    z = rng.normal(0.0, 1.0, (n, 2))
    r = np.empty(n)
    r[0] = 0.0
    r[1:] = 0.01 + 0.02 * z[:-1, 0]
    return SectorPanel(
        sector_id="10",
        period_ids=month_ids(n),
        returns_eq=r,
        returns_cap=r,
        factor_names=("f1", "f2"),
        factors=z,
    )


class TestRefitDates:
    def test_blocks(self):
        assert refit_dates(50, SCHEDULE) == [25, 37, 49]

    def test_too_short(self):
        with pytest.raises(InsufficientHistoryError):
            refit_dates(25, SCHEDULE)


class TestRunSchedule:
    def test_pairs_lagged_factors_with_returns(self):
        sector = _sector()
        panel = run_schedule(sector, [ForecasterSpec(kind="ols")], SCHEDULE)
        assert panel.period_ids[0] == sector.period_ids[25]
        assert panel.periods == 35
        assert panel.forecasts[:, 0] == pytest.approx(panel.realized, abs=1e-12)
        assert panel.complete

    def test_no_future_returns_in_training(self):
        sector = _sector()
        base = run_schedule(sector, [ForecasterSpec(kind="ols", features=["f2"])], SCHEDULE)
        r = sector.returns_eq.copy()
        r[37:] += 5.0
        shifted = SectorPanel(
            sector_id="10",
            period_ids=sector.period_ids,
            returns_eq=r,
            returns_cap=r,
            factor_names=sector.factor_names,
            factors=sector.factors,
        )
        after = run_schedule(shifted, [ForecasterSpec(kind="ols", features=["f2"])], SCHEDULE)
        # the first block (targets 25..36) was fitted on rows 1..24 only
        assert np.array_equal(base.forecasts[:12], after.forecasts[:12])
        assert not np.allclose(base.forecasts[24:], after.forecasts[24:])

    def test_expanding_window_uses_all_history(self):
        sector = _sector()
        calls = []

        def source(train, score):
            calls.append((train[0], len(train)))
            idx = [sector.period_ids.index(p) for p in score]
            return sector.factors[idx], sector.factor_names

        schedule = RollingSchedule(train_length=24, refit_every=12, window_kind="expanding")
        run_schedule(sector, [ForecasterSpec(kind="ols")], schedule, factor_source=source)
        assert [c[0] for c in calls] == [sector.period_ids[0]] * 3
        assert [c[1] for c in calls] == [25, 37, 49]

    def test_rolling_window_slides(self):
        sector = _sector()
        calls = []

        def source(train, score):
            calls.append(train)
            idx = [sector.period_ids.index(p) for p in score]
            return sector.factors[idx], sector.factor_names

        panel = run_schedule(sector, [ForecasterSpec(kind="ols")], SCHEDULE, factor_source=source)
        assert [len(t) for t in calls] == [25, 25, 25]
        assert calls[1][0] == sector.period_ids[12]
        assert panel.forecasts[:, 0] == pytest.approx(panel.realized, abs=1e-12)

    def test_failing_spec_is_masked(self):
        sector = _sector()
        specs = [ForecasterSpec(kind="ols"), ForecasterSpec(kind="pcr", features=[])]
        panel = run_schedule(sector, specs, SCHEDULE)
        assert panel.model_ids == ("ols", "pcr")
        assert panel.available[:, 0].all()
        assert not panel.available[:, 1].any()

    def test_needs_a_fittable_spec(self):
        with pytest.raises(EnsembleError) as exc:
            run_schedule(_sector(), [ForecasterSpec(kind="external", name="x")], SCHEDULE)
        assert exc.value.code == error_codes.CONFIG_INVALID

    def test_cap_weighting_targets_cap_returns(self):
        sector = _sector()
        panel = run_schedule(sector, [ForecasterSpec(kind="ols")], SCHEDULE, weighting="cap")
        assert panel.realized == pytest.approx(sector.returns_cap[25:])
