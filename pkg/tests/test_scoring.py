# tests/test_scoring.py
import numpy as np
import pytest

from src import error_codes
from src.errors import DimensionMismatchError, NumericalError
from src.schemas import WeightDistribution
from src.scoring import combine, r2_oos, r2_table, simple_average
from tests.conftest import make_panel


def test_combine_is_weighted_sum():
    p = WeightDistribution(np.array([0.25, 0.75]))
    assert combine([0.04, 0.08], p) == pytest.approx(0.07)


def test_combine_length_mismatch():
    with pytest.raises(DimensionMismatchError):
        combine([0.01, 0.02, 0.03], WeightDistribution.uniform(2))


def test_r2_perfect_forecast_is_one():
    assert r2_oos([0.01, -0.02, 0.03], [0.01, -0.02, 0.03]) == pytest.approx(1.0)


def test_r2_zero_forecast_is_zero():
    assert r2_oos([0.01, -0.02, 0.03], [0.0, 0.0, 0.0]) == pytest.approx(0.0)


def test_r2_benchmark_is_not_demeaned():
    # forecasting the sample mean beats zero here, so R² against zero is positive
    r = np.array([0.02, 0.03, 0.04])
    assert r2_oos(r, np.full(3, r.mean())) == pytest.approx(1.0 - 0.0002 / 0.0029)


def test_r2_can_be_negative():
    assert r2_oos([0.01, 0.01], [0.03, 0.03]) == pytest.approx(-3.0)


def test_r2_undefined_on_zero_returns():
    with pytest.raises(NumericalError) as exc:
        r2_oos([0.0, 0.0], [0.01, 0.0])
    assert exc.value.code == error_codes.UNDEFINED_R2


def test_simple_average_respects_availability():
    panel = make_panel(
        [[0.01, 0.03], [0.02, 0.0]],
        [0.02, 0.02],
        available=np.array([[True, True], [True, False]]),
    )
    assert simple_average(panel).tolist() == pytest.approx([0.02, 0.02])


def test_r2_table_has_every_model_and_average():
    panel = make_panel([[0.01, 0.0], [0.02, 0.0]], [0.01, 0.02])
    table = r2_table(panel)
    assert set(table) == {"m0", "m1", "simple_average"}
    assert table["m0"] == pytest.approx(1.0)
    assert table["m1"] == pytest.approx(0.0)
    assert table["simple_average"] == pytest.approx(0.75)
