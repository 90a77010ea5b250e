# tests/test_alphas.py
import numpy as np
import pandas as pd
import pytest

from src import error_codes
from src.alphas import (
    date_split,
    default_nw_lags,
    factor_alphas,
    hac_regression,
    moving_average_sign,
    newey_west_cov,
    prior_month_sign,
    significance_stars,
    subsample_stats,
)
from src.errors import DataValidationError, NumericalError
from tests.conftest import month_ids


def _factors(n=240, seed=0):
    rng = np.random.default_rng(seed)
    return pd.DataFrame(
        {
            "mkt": rng.normal(0.005, 0.04, n),
            "smb": rng.normal(0.0, 0.02, n),
            "hml": rng.normal(0.0, 0.02, n),
            "mom": rng.normal(0.0, 0.03, n),
        },
        index=pd.Index(month_ids(n), name="period"),
    )


class TestFactorAlphas:
    def test_recovers_alpha_and_beta(self):
        factors = _factors()
        noise = np.random.default_rng(1).normal(0.0, 0.001, len(factors))
        excess = 0.004 + 1.5 * factors["mkt"] + noise
        result = factor_alphas(excess, factors, "capm")
        assert result.alpha == pytest.approx(0.004, abs=2e-4)
        assert result.coefficients["mkt"] == pytest.approx(1.5, abs=0.01)
        assert result.t_stat > 10
        assert result.lags == default_nw_lags(240)

    def test_excess_model_is_the_mean(self):
        factors = _factors(60)
        excess = pd.Series(np.linspace(-0.01, 0.03, 60), index=factors.index)
        result = factor_alphas(excess, factors, "excess")
        assert result.alpha == pytest.approx(excess.mean())
        assert list(result.coefficients) == ["alpha"]

    def test_carhart_names(self):
        factors = _factors(120)
        excess = pd.Series(np.random.default_rng(2).normal(0.0, 0.02, 120), index=factors.index)
        result = factor_alphas(excess, factors, "carhart4")
        assert list(result.coefficients) == ["alpha", "mkt", "smb", "hml", "mom"]

    def test_missing_factor_column(self):
        factors = _factors(60).drop(columns=["mom"])
        excess = pd.Series(0.01, index=factors.index)
        with pytest.raises(DataValidationError) as exc:
            factor_alphas(excess, factors, "carhart4")
        assert exc.value.code == error_codes.MISSING_HEADER

    def test_unaligned_periods(self):
        factors = _factors(60)
        excess = pd.Series(0.01, index=list(month_ids(61)))
        with pytest.raises(DataValidationError) as exc:
            factor_alphas(excess, factors, "capm")
        assert exc.value.code == error_codes.MISALIGNED

    def test_unknown_model(self):
        factors = _factors(60)
        with pytest.raises(DataValidationError):
            factor_alphas(pd.Series(0.01, index=factors.index), factors, "ff5")

    def test_collinear_factors(self):
        factors = _factors(60)
        factors["hml"] = factors["smb"]
        excess = pd.Series(np.random.default_rng(3).normal(0.0, 0.02, 60), index=factors.index)
        with pytest.raises(NumericalError) as exc:
            factor_alphas(excess, factors, "ff3")
        assert exc.value.code == error_codes.RANK_DEFICIENT


class TestNeweyWest:
    def test_default_lags(self):
        assert default_nw_lags(100) == 4
        assert default_nw_lags(400) == 5

    def test_lag_zero_is_white(self):
        rng = np.random.default_rng(4)
        X = np.column_stack([np.ones(50), rng.normal(size=50)])
        e = rng.normal(size=50)
        bread = np.linalg.inv(X.T @ X)
        white = bread @ (X.T * e**2) @ X @ bread
        assert newey_west_cov(X, e, 0) == pytest.approx(white)

    def test_negative_lag(self):
        with pytest.raises(DataValidationError):
            newey_west_cov(np.ones((5, 1)), np.ones(5), -1)

    def test_too_few_observations(self):
        with pytest.raises(DataValidationError):
            hac_regression([0.1], np.ones((1, 1)), ["alpha"])


@pytest.mark.parametrize(
    "t, stars",
    [(2.6, "***"), (-2.0, "**"), (1.7, "*"), (1.0, ""), (float("nan"), "")],
)
def test_significance_stars(t, stars):
    assert significance_stars(t) == stars


class TestSubsamples:
    def test_means_per_group(self):
        idx = list(month_ids(6))
        series = pd.Series([0.01, 0.03, -0.01, -0.03, 0.02, 0.04], index=idx)
        indicator = pd.Series(["up", "up", "down", "down", "up", "up"], index=idx)
        table = subsample_stats(series, indicator, nw_lags=0)
        assert table["subsample"].tolist() == ["down", "up"]
        assert table["n"].tolist() == [2, 4]
        assert table["mean"].tolist() == pytest.approx([-0.02, 0.025])

    def test_single_observation_has_no_t(self):
        idx = list(month_ids(3))
        table = subsample_stats(pd.Series([0.01, 0.02, 0.03], index=idx), pd.Series(["a", "a", "b"], index=idx))
        assert np.isnan(table.loc[table["subsample"] == "b", "t_stat"].iloc[0])

    def test_prior_month_sign(self):
        market = pd.Series([0.01, -0.02, 0.03], index=["2000-01", "2000-02", "2000-03"])
        sign = prior_month_sign(market)
        assert pd.isna(sign.iloc[0])
        assert sign.iloc[1:].tolist() == ["up", "down"]

    def test_date_split(self):
        split = date_split(["1999-12", "2000-01", "2000-02"], "2000-01")
        assert split.tolist() == ["before", "after", "after"]

    def test_moving_average_sign(self):
        series = pd.Series([0.01, 0.01, -0.05, 0.02], index=list(month_ids(4)))
        activity = moving_average_sign(series, window=2)
        assert pd.isna(activity.iloc[0])
        assert activity.iloc[1:].tolist() == ["above", "below", "below"]
