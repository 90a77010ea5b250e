# tests/test_forecasters.py
"""
Tests for the OLS, LASSO and PCR base forecasters.
"""
import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import DataValidationError, InsufficientHistoryError
from src.forecasters import (
    ForecasterSpec,
    LassoForecaster,
    blocked_folds,
    fit_lasso,
    fit_ols,
    fit_pcr,
    lambda_max,
    lambda_path,
    make_forecaster,
    predict_linear,
    select_lasso_lambda,
    select_pcr_components,
    soft_threshold,
)


def _design(T=120, P=3, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    Z = rng.normal(0.0, 1.0, (T, P))
    beta = np.array([1.0, -2.0, 0.0, 0.5, 0.0][:P])
    r = 0.5 + Z @ beta + noise * rng.normal(0.0, 1.0, T)
    return Z, r


class TestOls:
    def test_recovers_coefficients(self):
        Z, r = _design()
        assert fit_ols(Z, r) == pytest.approx([0.5, 1.0, -2.0, 0.0], abs=1e-10)

    def test_rank_deficient_uses_pinv(self):
        Z, r = _design(P=2)
        Zd = np.column_stack([Z, Z[:, 0]])
        theta = fit_ols(Zd, r)
        assert predict_linear(theta, Zd) == pytest.approx(r, abs=1e-9)

    def test_too_few_rows(self):
        with pytest.raises(InsufficientHistoryError):
            fit_ols(np.ones((3, 3)), np.ones(3))

    def test_row_mismatch(self):
        with pytest.raises(DataValidationError):
            fit_ols(np.ones((5, 1)), np.ones(4))

    def test_non_finite(self):
        Z, r = _design()
        Z[0, 0] = np.nan
        with pytest.raises(DataValidationError):
            fit_ols(Z, r)


class TestLasso:
    def test_soft_threshold(self):
        assert soft_threshold(3.0, 1.0) == 2.0
        assert soft_threshold(-3.0, 1.0) == -2.0
        assert soft_threshold(0.5, 1.0) == 0.0

    def test_all_zero_at_lambda_max(self):
        Z, r = _design(noise=0.5)
        top = lambda_max(Z, r)
        fit = fit_lasso(Z, r, top)
        assert fit.theta[1:] == pytest.approx(np.zeros(3), abs=1e-12)
        assert fit.theta[0] == pytest.approx(r.mean())
        below = fit_lasso(Z, r, top * 0.9)
        assert np.any(below.theta[1:] != 0.0)

    def test_zero_penalty_matches_ols(self):
        Z, r = _design(noise=0.3, seed=2)
        fit = fit_lasso(Z, r, 0.0)
        assert fit.converged
        assert fit.theta == pytest.approx(fit_ols(Z, r), abs=1e-6)

    def test_negative_lambda_rejected(self):
        Z, r = _design()
        with pytest.raises(DataValidationError):
            fit_lasso(Z, r, -1.0)

    def test_lambda_path_descends_from_max(self):
        Z, r = _design(noise=0.5)
        path = lambda_path(Z, r, n=5)
        assert path[0] == pytest.approx(lambda_max(Z, r))
        assert path == sorted(path, reverse=True)
        assert len(path) == 5

    def test_strong_signal_picks_small_lambda(self):
        Z, r = _design(noise=0.1, seed=3)
        top = lambda_max(Z, r)
        assert select_lasso_lambda(Z, r, [top, top * 1e-3], folds=4) == pytest.approx(top * 1e-3)

    def test_intercept_only_without_features(self):
        model = LassoForecaster(ForecasterSpec(kind="lasso")).fit(np.zeros((30, 0)), np.arange(30.0))
        assert model.predict(np.zeros((2, 0))).tolist() == pytest.approx([14.5, 14.5])


class TestBlockedFolds:
    def test_contiguous_blocks(self):
        folds = blocked_folds(10, 3)
        assert [f.tolist() for f in folds] == [[0, 1, 2, 3], [4, 5, 6], [7, 8, 9]]

    def test_too_few_rows(self):
        with pytest.raises(InsufficientHistoryError):
            blocked_folds(2, 5)


class TestPcr:
    def test_full_rank_matches_ols(self):
        Z, r = _design(noise=0.3, seed=4)
        Z_new = np.random.default_rng(9).normal(0.0, 1.0, (5, 3))
        pcr = fit_pcr(Z, r, 3)
        assert pcr.predict(Z_new) == pytest.approx(predict_linear(fit_ols(Z, r), Z_new), abs=1e-9)

    def test_component_bounds(self):
        Z, r = _design()
        with pytest.raises(DataValidationError):
            fit_pcr(Z, r, 0)
        with pytest.raises(DataValidationError):
            fit_pcr(Z, r, 4)

    def test_selection_within_range(self):
        Z, r = _design(P=5, noise=0.5, seed=5)
        m = select_pcr_components(Z, r, folds=4)
        assert 1 <= m <= 5


class TestSpecs:
    def test_model_id_defaults_to_kind(self):
        assert ForecasterSpec(kind="ols").model_id == "ols"
        assert ForecasterSpec(kind="ols", name="ols_value").model_id == "ols_value"

    def test_bad_grids(self):
        with pytest.raises(ValidationError):
            ForecasterSpec(kind="lasso", lambda_grid=[-0.1])
        with pytest.raises(ValidationError):
            ForecasterSpec(kind="pcr", components=[0])

    def test_external_cannot_be_fitted(self):
        with pytest.raises(DataValidationError):
            make_forecaster(ForecasterSpec(kind="external", name="vendor"))
