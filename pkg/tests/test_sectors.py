# tests/test_sectors.py
"""
Tests for sector aggregation and sector factor scores.
"""
import numpy as np
import pandas as pd
import pytest

from src import error_codes
from src.errors import DataValidationError, FactorUnavailableError
from src.schemas import AssetPanel
from src.sectors import (
    WindowedFactors,
    build_sector_panels,
    factor_matrix,
    sector_factor,
    sector_returns,
)
from src.synthetic import SyntheticSpec, generate_synthetic


def _panel(rows, factor_rows=None):
    obs = pd.DataFrame(rows, columns=["period", "asset_id", "ret", "market_cap", "sector_code"])
    fac = pd.DataFrame(factor_rows or [], columns=["period", "asset_id", "factor_name", "value"])
    return AssetPanel(obs, fac)


def _synthetic(n_months=60, **kw):
    spec = SyntheticSpec(n_sectors=2, n_factors=2, n_months=n_months, seed=11, assets_per_sector=6, **kw)
    return generate_synthetic(spec)


class TestSectorReturns:
    def test_equal_weighting(self):
        panel = _panel(
            [
                ("2000-01", "a", 0.01, 10.0, "10"),
                ("2000-01", "b", 0.03, 30.0, "10"),
                ("2000-01", "c", -0.02, 5.0, "20"),
            ]
        )
        table = sector_returns(panel, "equal").returns
        assert table.loc["2000-01", "10"] == pytest.approx(0.02)
        assert table.loc["2000-01", "20"] == pytest.approx(-0.02)

    def test_cap_weighting_uses_lagged_caps(self):
        panel = _panel(
            [
                ("2000-01", "a", 0.01, 10.0, "10"),
                ("2000-01", "b", 0.03, 30.0, "10"),
                ("2000-02", "a", 0.10, 20.0, "10"),
                ("2000-02", "b", 0.20, 20.0, "10"),
            ]
        )
        result = sector_returns(panel, "cap")
        assert result.returns.loc["2000-02", "10"] == pytest.approx((10 * 0.10 + 30 * 0.20) / 40)
        # no lagged caps in the first month
        assert result.returns.loc["2000-01", "10"] == pytest.approx(0.02)
        assert ("10", "2000-01") in result.fallbacks

    def test_cap_lag_must_be_previous_month(self):
        panel = _panel(
            [
                ("2000-01", "a", 0.01, 1000.0, "10"),
                ("2000-02", "b", 0.02, 10.0, "10"),
                ("2000-03", "a", 0.10, 10.0, "10"),
                ("2000-03", "b", 0.20, 10.0, "10"),
            ]
        )
        # a's January cap is two months old, so only b is weighted in March
        table = sector_returns(panel, "cap").returns
        assert table.loc["2000-03", "10"] == pytest.approx(0.20)

    def test_membership_follows_the_period(self):
        panel = _panel(
            [
                ("2000-01", "a", 0.01, 10.0, "10"),
                ("2000-01", "b", 0.05, 10.0, "20"),
                ("2000-02", "a", 0.02, 10.0, "20"),
                ("2000-02", "b", 0.04, 10.0, "20"),
                ("2000-02", "c", 0.00, 10.0, "10"),
            ]
        )
        table = sector_returns(panel, "equal").returns
        assert table.loc["2000-02", "20"] == pytest.approx(0.03)
        assert table.loc["2000-02", "10"] == pytest.approx(0.0)

    def test_gap_inside_sector_span(self):
        panel = _panel(
            [
                ("2000-01", "a", 0.01, 10.0, "10"),
                ("2000-02", "b", 0.01, 10.0, "20"),
                ("2000-03", "a", 0.01, 10.0, "10"),
            ]
        )
        with pytest.raises(DataValidationError) as exc:
            sector_returns(panel, "equal")
        assert exc.value.code == error_codes.EMPTY_SECTOR

    def test_unknown_weighting(self):
        panel = _panel([("2000-01", "a", 0.01, 10.0, "10")])
        with pytest.raises(DataValidationError):
            sector_returns(panel, "float")


class TestSectorFactor:
    def test_factor_matrix_uses_members_only(self):
        panel = _panel(
            [
                ("2000-01", "a", 0.01, 10.0, "10"),
                ("2000-01", "b", 0.01, 10.0, "20"),
            ],
            [
                ("2000-01", "a", "value", 1.0),
                ("2000-01", "b", "value", 2.0),
            ],
        )
        X, assets = factor_matrix(panel, "10", "value", ["2000-01"])
        assert assets == ["a"]
        assert X.tolist() == [[1.0]]

    def test_needs_two_assets(self):
        panel = _panel(
            [("2000-01", "a", 0.01, 10.0, "10")],
            [("2000-01", "a", "value", 1.0)],
        )
        with pytest.raises(FactorUnavailableError) as exc:
            sector_factor(panel, "10", "value")
        assert exc.value.code == error_codes.FACTOR_UNAVAILABLE

    def test_tracks_latent_factor(self):
        data = _synthetic(n_months=120)
        scores = sector_factor(data.panel, "10", "f1")
        latent = data.truth.factors["10"][:, 0]
        assert scores.shape == (120,)
        assert np.corrcoef(scores, latent)[0, 1] > 0.9


class TestWindowedFactors:
    def test_window_mode_does_not_look_ahead(self):
        data = _synthetic()
        periods = data.panel.periods
        train, score = periods[:36], periods[:48]
        before, names = WindowedFactors(data.panel, "10", ("f1", "f2"))(train, score)

        fac = data.panel.factor_values.copy()
        late = fac["period"] >= periods[40]
        fac.loc[late, "value"] = fac.loc[late, "value"] * 50.0 + 3.0
        shocked = AssetPanel(data.panel.observations, fac)
        after, _ = WindowedFactors(shocked, "10", ("f1", "f2"))(train, score)

        assert names == ("f1", "f2")
        assert before.shape == (48, 2)
        assert np.array_equal(before[:40], after[:40])
        assert not np.allclose(before[40:], after[40:])

    def test_unknown_factor_is_dropped(self):
        data = _synthetic()
        periods = data.panel.periods
        Z, names = WindowedFactors(data.panel, "10", ("f1", "nope"))(periods[:36], periods[:40])
        assert names == ("f1",)
        assert Z.shape == (40, 1)

    def test_full_mode_slices_full_fit(self):
        data = _synthetic()
        periods = data.panel.periods
        Z, _ = WindowedFactors(data.panel, "11", ("f2",), mode="full")(periods[:10], periods[5:15])
        assert Z[:, 0] == pytest.approx(sector_factor(data.panel, "11", "f2")[5:15])

    def test_bad_mode(self):
        data = _synthetic()
        with pytest.raises(DataValidationError):
            WindowedFactors(data.panel, "10", ("f1",), mode="peek")


def test_build_sector_panels():
    data = _synthetic()
    panels = build_sector_panels(data.panel)
    assert sorted(panels) == ["10", "11"]
    sector = panels["10"]
    assert sector.factor_names == ("f1", "f2")
    assert sector.factors.shape == (60, 2)
    assert len(sector.period_ids) == 60
    eq = sector_returns(data.panel, "equal").returns["10"].to_numpy()
    assert sector.returns_eq == pytest.approx(eq)
