# tests/test_schemas.py
"""
Tests for the shared domain types.
"""
import numpy as np
import pandas as pd
import pytest

from src import error_codes
from src.errors import DataValidationError, DimensionMismatchError
from src.schemas import (
    AssetPanel,
    GainVector,
    PredictionPanel,
    SectorPanel,
    WeightDistribution,
    merge_panels,
    normalize_period,
)
from tests.conftest import make_panel


class TestWeightDistribution:
    def test_uniform(self):
        p = WeightDistribution.uniform(4)
        assert p.p.tolist() == [0.25] * 4
        assert len(p) == 4

    def test_rejects_negative(self):
        with pytest.raises(DataValidationError) as exc:
            WeightDistribution(np.array([1.2, -0.2]))
        assert exc.value.code == error_codes.INVALID_WEIGHTS

    def test_rejects_bad_sum(self):
        with pytest.raises(DataValidationError):
            WeightDistribution(np.array([0.5, 0.6]))

    def test_from_weights_zeroes_inactive(self):
        p = WeightDistribution.from_weights(np.array([2.0, 5.0, 2.0]), np.array([True, False, True]))
        assert p.p.tolist() == [0.5, 0.0, 0.5]

    def test_is_read_only(self):
        p = WeightDistribution.uniform(2)
        with pytest.raises(ValueError):
            p.p[0] = 1.0


class TestGainVector:
    def test_defaults_unclipped(self):
        g = GainVector(np.array([0.2, -0.4]))
        assert not g.any_clipped
        assert g.clip_mass.tolist() == [0.0, 0.0]

    def test_flag_shape_checked(self):
        with pytest.raises(DimensionMismatchError):
            GainVector(np.array([0.1, 0.2]), clipped=np.array([True]))


class TestPredictionPanel:
    def test_shapes(self):
        panel = make_panel([[0.01, 0.02], [0.03, 0.04], [0.0, 0.01]], [0.02, 0.01, 0.0])
        assert panel.periods == 3
        assert panel.models == 2
        assert panel.complete
        assert panel.period_ids == ("2000-01", "2000-02", "2000-03")

    def test_realized_length_checked(self):
        with pytest.raises(DimensionMismatchError):
            make_panel([[0.01, 0.02], [0.03, 0.04]], [0.02])

    def test_non_finite_rejected(self):
        with pytest.raises(DataValidationError) as exc:
            make_panel([[0.01, np.nan]], [0.02])
        assert exc.value.code == error_codes.NON_FINITE

    def test_periods_must_increase(self):
        with pytest.raises(DataValidationError) as exc:
            PredictionPanel(
                forecasts=np.zeros((2, 1)),
                realized=np.array([0.01, 0.02]),
                model_ids=("a",),
                period_ids=("2000-02", "2000-01"),
            )
        assert exc.value.code == error_codes.BAD_PERIOD

    def test_duplicate_model_ids_rejected(self):
        with pytest.raises(DimensionMismatchError):
            PredictionPanel(
                forecasts=np.zeros((1, 2)),
                realized=np.array([0.01]),
                model_ids=("a", "a"),
                period_ids=("2000-01",),
            )

    def test_select_and_slice(self):
        panel = make_panel([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], [0.1, 0.2])
        sub = panel.select_models(["m2", "m0"]).slice_periods(1)
        assert sub.model_ids == ("m2", "m0")
        assert sub.forecasts.tolist() == [[6.0, 4.0]]
        assert sub.period_ids == ("2000-02",)

    def test_select_unknown_model(self):
        panel = make_panel([[1.0]], [0.1])
        with pytest.raises(DataValidationError) as exc:
            panel.select_models(["zz"])
        assert exc.value.code == error_codes.MISALIGNED


class TestMergePanels:
    def test_joins_common_periods(self):
        a = make_panel([[1.0], [2.0], [3.0]], [0.1, 0.2, 0.3])
        b = PredictionPanel(
            forecasts=np.array([[9.0], [8.0]]),
            realized=np.array([0.2, 0.3]),
            model_ids=("ext",),
            period_ids=("2000-02", "2000-03"),
        )
        merged = merge_panels([a, b])
        assert merged.model_ids == ("m0", "ext")
        assert merged.period_ids == ("2000-02", "2000-03")
        assert merged.forecasts.tolist() == [[2.0, 9.0], [3.0, 8.0]]

    def test_disagreeing_realized_rejected(self):
        a = make_panel([[1.0]], [0.1])
        b = PredictionPanel(
            forecasts=np.array([[2.0]]), realized=np.array([0.5]), model_ids=("ext",), period_ids=("2000-01",)
        )
        with pytest.raises(DataValidationError) as exc:
            merge_panels([a, b])
        assert exc.value.code == error_codes.MISALIGNED


class TestNormalizePeriod:
    def test_accepts_dates(self):
        assert normalize_period("2001-03-31") == "2001-03"
        assert normalize_period("2001-03") == "2001-03"

    def test_rejects_garbage(self):
        with pytest.raises(DataValidationError) as exc:
            normalize_period("March")
        assert exc.value.code == error_codes.BAD_PERIOD


def _obs(**overrides):
    rows = {
        "period": ["2000-01", "2000-01"],
        "asset_id": ["a", "b"],
        "ret": [0.01, 0.02],
        "market_cap": [10.0, 20.0],
        "sector_code": ["10", "10"],
    }
    rows.update(overrides)
    return pd.DataFrame(rows)


_FACTORS = pd.DataFrame(
    {"period": ["2000-01"], "asset_id": ["a"], "factor_name": ["value"], "value": [0.5]}
)


class TestAssetPanel:
    def test_sorted_and_typed(self):
        panel = AssetPanel(_obs(asset_id=["b", "a"]), _FACTORS)
        assert panel.observations["asset_id"].tolist() == ["a", "b"]
        assert panel.sectors == ["10"]
        assert panel.factor_names == ["value"]

    def test_duplicate_observation(self):
        with pytest.raises(DataValidationError) as exc:
            AssetPanel(_obs(asset_id=["a", "a"]), _FACTORS)
        assert exc.value.code == error_codes.DUPLICATE_KEY

    def test_missing_sector(self):
        with pytest.raises(DataValidationError) as exc:
            AssetPanel(_obs(sector_code=["10", None]), _FACTORS)
        assert exc.value.code == error_codes.EMPTY_SECTOR

    def test_missing_column(self):
        with pytest.raises(DataValidationError) as exc:
            AssetPanel(_obs().drop(columns=["market_cap"]), _FACTORS)
        assert exc.value.code == error_codes.MISSING_HEADER


class TestSectorPanel:
    def test_returns_by_weighting(self):
        panel = SectorPanel(
            sector_id="10",
            period_ids=("2000-01", "2000-02"),
            returns_eq=np.array([0.01, 0.02]),
            returns_cap=np.array([0.03, 0.04]),
            factor_names=("value",),
            factors=np.array([[0.1], [0.2]]),
        )
        assert panel.returns("equal").tolist() == [0.01, 0.02]
        assert panel.returns("cap").tolist() == [0.03, 0.04]
        with pytest.raises(DataValidationError):
            panel.returns("float")
        frame = panel.to_frame()
        assert list(frame.columns) == ["period", "ret_eq", "ret_cap", "value"]
