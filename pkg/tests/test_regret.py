# tests/test_regret.py
"""
Tests for the hindsight-optimal ensemble, regret diagnostics and the
gain/R² consistency check.
"""
import numpy as np
import pytest

from src import error_codes
from src.errors import DataValidationError, SingularMatrixError
from src.regret import (
    delta_tau,
    forecast_moments,
    kkt_weights,
    lemma1_check,
    optimal_weights,
    regret_report,
    regret_table,
)
from src.schemas import PredictionPanel
from src.scoring import r2_oos, simple_average
from src.synthetic import synthetic_prediction_panel
from src.weights import EtaPolicy, run_ensemble
from tests.conftest import make_panel, noisy_panel


class TestOptimalWeights:
    def test_perfect_model_gets_all_weight(self):
        rng = np.random.default_rng(0)
        r = rng.normal(0.0, 0.02, 60)
        panel = make_panel(np.column_stack([r, rng.normal(0.0, 0.02, 60)]), r)
        opt = optimal_weights(panel)
        assert opt.p_star == pytest.approx([1.0, 0.0], abs=1e-9)
        assert opt.r2_star == pytest.approx(1.0)

    def test_weights_sum_to_one(self):
        opt = optimal_weights(noisy_panel(80, seed=1))
        assert opt.p_star.sum() == pytest.approx(1.0)
        assert opt.delta_tau > 0.0
        assert opt.bound == min(1.0, opt.delta_tau)

    def test_beats_any_fixed_mix(self):
        panel = noisy_panel(80, seed=2)
        opt = optimal_weights(panel)
        assert opt.r2_star >= r2_oos(panel.realized, simple_average(panel))
        for p in ([1.0, 0.0, 0.0], [0.2, 0.5, 0.3], [1.5, -0.5, 0.0]):
            assert opt.r2_star >= r2_oos(panel.realized, panel.forecasts @ np.array(p)) - 1e-12

    def test_closed_form_satisfies_kkt(self):
        panel = noisy_panel(80, seed=3)
        a, b = forecast_moments(panel)
        assert optimal_weights(panel).p_star == pytest.approx(kkt_weights(a, b), abs=1e-8)

    def test_duplicate_models_are_singular(self):
        r = np.random.default_rng(4).normal(0.0, 0.02, 30)
        panel = make_panel(np.column_stack([r, r]), r)
        with pytest.raises(SingularMatrixError):
            optimal_weights(panel)
        with pytest.raises(SingularMatrixError):
            delta_tau(panel)

    def test_ridge_jitter_is_flagged(self):
        rng = np.random.default_rng(5)
        r = rng.normal(0.0, 0.02, 30)
        panel = make_panel(np.column_stack([r, r, rng.normal(0.0, 0.02, 30)]), r)
        opt = optimal_weights(panel, ridge=True)
        assert error_codes.RIDGE_USED in opt.warnings
        assert opt.ridge > 0.0

    def test_kkt_minimum_norm_on_duplicates(self):
        r = np.random.default_rng(6).normal(0.0, 0.02, 30)
        panel = make_panel(np.column_stack([r, r]), r)
        a, b = forecast_moments(panel)
        assert kkt_weights(a, b) == pytest.approx([0.5, 0.5])


def _run(panel: PredictionPanel, kind: str = "fixed"):
    _, trace = run_ensemble(panel, EtaPolicy(kind=kind, eta=0.1), warmup_returns=panel.realized[:12])
    return trace


class TestRegretReport:
    def test_gap_is_difference(self):
        panel = noisy_panel(60, seed=8)
        diag = regret_report(panel, _run(panel))
        assert diag.gap == pytest.approx(diag.r2_star - diag.r2_ensemble)
        assert diag.tau == 60
        assert diag.eta == pytest.approx(0.1)
        assert diag.bound_cor5 <= diag.bound_cor3 + 1e-12

    def test_prefix(self):
        panel = noisy_panel(60, seed=8)
        diag = regret_report(panel, _run(panel), upto=24)
        assert diag.tau == 24

    def test_singular_falls_back_to_kkt(self):
        r = np.random.default_rng(9).normal(0.0, 0.02, 40)
        panel = make_panel(np.column_stack([r, r]), r)
        diag = regret_report(panel, _run(panel))
        assert error_codes.SINGULAR_MATRIX in diag.flags
        assert diag.delta_tau == float("inf")
        assert diag.r2_star == pytest.approx(1.0)

    def test_misaligned_trace_rejected(self):
        panel = noisy_panel(30, seed=1)
        trace = _run(noisy_panel(31, seed=1))
        with pytest.raises(DataValidationError) as exc:
            regret_report(panel, trace)
        assert exc.value.code == error_codes.MISALIGNED

    def test_normalized_effective_bound_uses_run_sigma(self):
        panel = noisy_panel(60, seed=15)
        _, trace = run_ensemble(panel, EtaPolicy(kind="fixed", eta=0.1), fixed_sigma2=4e-4)
        diag = regret_report(panel, trace)
        assert diag.effective_bound_r2 == pytest.approx(diag.effective_bound / 4e-4)
        assert diag.as_row()["effective_bound_r2"] == diag.effective_bound_r2

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_regime_switch_gap_within_normalized_bound(self, seed):
        panel, _ = synthetic_prediction_panel(2, 600, seed=seed, regimes=[(0, 0), (300, 1)])
        _, trace = run_ensemble(panel, EtaPolicy(kind="feasible"))
        diag = regret_report(panel, trace)
        assert diag.gap <= diag.effective_bound_r2 + diag.bound_cor5

    def test_table_checkpoints(self):
        panel = noisy_panel(50, seed=10)
        rows = regret_table(panel, _run(panel))
        assert [d.tau for d in rows] == [12, 24, 36, 48, 50]
        expected = {"tau", "r2_ensemble", "r2_star", "gap", "effective_bound", "effective_bound_r2"}
        assert set(rows[0].as_row()) >= expected

    def test_table_skips_unscored_prefixes(self):
        panel = noisy_panel(40, seed=11)
        _, trace = run_ensemble(panel, EtaPolicy(kind="fixed"), min_obs=12)
        rows = regret_table(panel, trace)
        # the 12-period prefix is all warm-up; tau counts scored periods only
        assert [d.tau for d in rows] == [12, 24, 28]


class TestLemma1:
    def test_oracle_sigma_matches_r2_exactly(self):
        panel = noisy_panel(100, seed=12)
        check = lemma1_check(panel, _run(panel, "feasible"), "oracle")
        assert check.discrepancy == pytest.approx(np.zeros(100), abs=1e-7)
        assert not check.flagged

    def test_fixed_sigma_equal_to_sample_moment(self):
        panel = noisy_panel(100, seed=13)
        trace = _run(panel)
        sigma2 = float(np.mean(panel.realized**2))
        check = lemma1_check(panel, trace, sigma2)
        assert check.discrepancy[-1] == pytest.approx(0.0, abs=1e-9)

    def test_estimated_discrepancy_shrinks_with_history(self):
        # d(τ) falls roughly like sqrt(2/τ) under the expanding second-moment estimate
        early, late = [], []
        for seed in range(5):
            panel, _ = synthetic_prediction_panel(3, 3000, seed=seed)
            _, trace = run_ensemble(panel, EtaPolicy(kind="fixed", eta=0.1))
            d = lemma1_check(panel, trace).discrepancy
            early.append(d[99])
            late.append(d[-1])
        assert max(late) < 0.1
        assert np.mean(late) < np.mean(early)

    def test_rejects_nonpositive_fixed_sigma(self):
        panel = noisy_panel(30, seed=1)
        with pytest.raises(DataValidationError):
            lemma1_check(panel, _run(panel), 0.0)

    def test_estimated_mode_reports_every_scored_period(self):
        panel = noisy_panel(48, seed=14)
        check = lemma1_check(panel, _run(panel), "estimated")
        assert check.discrepancy.shape == (48,)
        assert np.all(check.discrepancy >= 0.0)
