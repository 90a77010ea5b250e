# evals/checks.py
"""
Property checks behind the acceptance cases.

Each check takes its sample sizes as keyword arguments and returns
(passed, detail). Randomness comes from named Philox streams so every run
of a case sees the same draws.
"""
from __future__ import annotations

import filecmp
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.linalg import subspace_angles

from src.alphas import newey_west_cov
from src.cache_utils import named_rng
from src.config import load_config
from src.forecasters import fit_lasso, fit_ols, fit_pcr, lambda_max, predict_linear, ForecasterSpec
from src.gain import gain
from src.pipeline import PERF_FILE, REPORT_FILE, run_pipeline
from src.portfolio import max_drawdown, perf_stats, sortino, turnover
from src.ppca import ppca_fit, ppca_impute
from src.regret import lemma1_check, optimal_weights, regret_report
from src.schedule import RollingSchedule, run_schedule
from src.schemas import PredictionPanel, SectorPanel, WeightDistribution
from src.scoring import r2_oos, simple_average
from src.synthetic import synthetic_prediction_panel
from src.weights import EtaPolicy, init, run_ensemble, step


def check_gain_identity(*, draws: int = 10_000, seed: int = 0) -> tuple[bool, dict]:
    rng = named_rng(seed, "eval_gain_identity")
    worst = 0.0
    for _ in range(draws):
        n = int(rng.integers(2, 7))
        r = float(rng.normal(0.0, 0.05))
        r_hat = rng.normal(0.0, 0.05, n)
        p = WeightDistribution.from_weights(rng.dirichlet(np.ones(n)))
        sigma2 = float(rng.uniform(1e-3, 1e-2))
        m = gain(r, r_hat, p, sigma2).m
        expected = 1.0 - (r - r_hat @ p.p) ** 2 / sigma2
        worst = max(worst, abs(float(m @ p.p) - expected))
    return worst < 1e-12, {"draws": draws, "max_abs_error": worst}


def check_lemma1(
    *, seeds: int = 100, tau: int = 5000, early: int = 500, threshold: float = 0.01, rate: float = 0.95
) -> tuple[bool, dict]:
    hits = 0
    worst = 0.0
    for seed in range(seeds):
        panel, _ = synthetic_prediction_panel(3, tau, seed=seed)
        _, trace = run_ensemble(panel, EtaPolicy(kind="fixed", eta=0.1))
        d = lemma1_check(panel, trace).discrepancy
        late, first = float(d[-1]), float(d[min(early, d.size) - 1])
        worst = max(worst, late)
        hits += late < threshold and late < first
    return hits >= rate * seeds, {"seeds": seeds, "hits": hits, "worst_final": worst}


def _projected_gradient(a: np.ndarray, b: np.ndarray, *, max_iter: int = 200_000, tol: float = 1e-15) -> np.ndarray:
    """Maximize bᵀp - ½ pᵀAp on the plane 1ᵀp = 1 by gradient steps projected onto the plane."""
    n = b.size
    p = np.full(n, 1.0 / n)
    lr = 1.0 / float(np.linalg.eigvalsh(a).max())
    for _ in range(max_iter):
        g = b - a @ p
        g -= g.mean()
        nxt = p + lr * g
        if np.max(np.abs(nxt - p)) < tol:
            return nxt
        p = nxt
    return p


def check_oracle(*, panels: int = 50, tau: int = 200, probes: int = 1000) -> tuple[bool, dict]:
    rng = named_rng(0, "eval_oracle")
    worst_dp, violations = 0.0, 0
    for _ in range(panels):
        n = int(rng.integers(2, 7))
        r = 0.05 * rng.standard_normal(tau)
        loadings = rng.uniform(0.2, 1.0, n)
        noise = 0.05 * rng.uniform(0.5, 1.5, n) * rng.standard_normal((tau, n))
        forecasts = r[:, None] * loadings + noise
        panel = PredictionPanel(
            forecasts=forecasts,
            realized=r,
            model_ids=tuple(f"m{j}" for j in range(n)),
            period_ids=tuple(str(p) for p in pd.period_range("2000-01", periods=tau, freq="M")),
        )
        opt = optimal_weights(panel)
        a = forecasts.T @ forecasts / tau
        b = forecasts.T @ r / tau
        worst_dp = max(worst_dp, float(np.max(np.abs(opt.p_star - _projected_gradient(a, b)))))
        for _ in range(probes):
            p = rng.standard_normal(n)
            p += (1.0 - p.sum()) / n
            if r2_oos(r, forecasts @ p) > opt.r2_star + 1e-12:
                violations += 1
    return worst_dp < 1e-6 and violations == 0, {"max_abs_dp": worst_dp, "probe_violations": violations}


def check_regret(*, seeds: int = 100, tau: int = 2000, rate: float = 0.95) -> tuple[bool, dict]:
    within = beats_worse = 0
    for seed in range(seeds):
        panel, _ = synthetic_prediction_panel(2, tau, seed=seed, regimes=[(0, 0), (tau // 2, 1)])
        _, trace = run_ensemble(panel, EtaPolicy(kind="feasible"))
        diag = regret_report(panel, trace)
        within += diag.gap <= diag.effective_bound_r2 + diag.bound_cor5
        singles = [r2_oos(panel.realized, panel.forecasts[:, j]) for j in range(panel.models)]
        beats_worse += r2_oos(panel.realized, trace.combined) > min(singles)
    passed = within >= rate * seeds and beats_worse == seeds
    return passed, {"seeds": seeds, "within_bound": within, "beats_worse_single": beats_worse}


def check_ordering(*, seeds: int = 100, tau: int = 2000, rate: float = 0.90) -> tuple[bool, dict]:
    wins = 0
    for seed in range(seeds):
        panel, _ = synthetic_prediction_panel(3, tau, seed=seed)
        _, trace = run_ensemble(panel, EtaPolicy(kind="feasible"))
        wins += r2_oos(panel.realized, trace.combined) >= r2_oos(panel.realized, simple_average(panel))
    return wins >= rate * seeds, {"seeds": seeds, "feasible_wins": wins}


def check_simplex_invariants(*, steps: int = 100_000, models: int = 5) -> tuple[bool, dict]:
    rng = named_rng(0, "eval_simplex")
    state = init(models, EtaPolicy(kind="fixed", eta=0.5))
    worst = 0.0
    positive = True
    for _ in range(steps):
        # huge forecasts drive gains far below -1, zero forecasts on a zero return give +1
        r_hat = np.where(rng.random(models) < 0.5, 0.0, 10.0 * rng.choice([-1.0, 1.0], models))
        state, diag = step(state, 0.0, r_hat, sigma2=1.0)
        worst = max(worst, abs(float(diag.weights.sum()) - 1.0))
        positive &= bool(np.all(diag.weights >= 0.0) and np.all(np.isfinite(state.log_w)))
    return positive and worst <= 1e-12, {"steps": steps, "max_sum_error": worst, "positive": positive}


def check_ppca(*, dims=(10, 30, 50), t: int = 200, seed: int = 0) -> tuple[bool, dict]:
    rng = named_rng(seed, "eval_ppca")
    worst_angle, monotone, worst_ratio = 0.0, True, 0.0
    for k in dims:
        for q in (1, 2, 3):
            X = rng.standard_normal((k, q)) @ rng.standard_normal((q, t)) + 0.1 * rng.standard_normal((k, t))
            model = ppca_fit(X, q, tol=1e-12, max_iter=5000)
            centered = X - X.mean(axis=1, keepdims=True)
            u = np.linalg.svd(centered, full_matrices=False)[0][:, :q]
            worst_angle = max(worst_angle, float(subspace_angles(model.W, u).max()))
            monotone &= bool(np.all(np.diff(model.loglik_trace) >= -1e-9 * np.abs(model.loglik_trace[1:])))

    noise = 0.1
    X = rng.standard_normal((20, 2)) @ rng.standard_normal((2, t)) + noise * rng.standard_normal((20, t))
    missing = rng.random(X.shape) < 0.1
    model = ppca_fit(np.where(missing, np.nan, X), 2, tol=1e-10, max_iter=5000)
    filled = ppca_impute(model, np.where(missing, np.nan, X))
    rmse = float(np.sqrt(np.mean((filled[missing] - X[missing]) ** 2)))
    worst_ratio = rmse / noise
    monotone &= bool(np.all(np.diff(model.loglik_trace) >= -1e-9 * np.abs(model.loglik_trace[1:])))
    passed = worst_angle < 1e-6 and monotone and worst_ratio <= 2.0
    return passed, {"max_angle": worst_angle, "loglik_monotone": monotone, "impute_rmse_over_noise": worst_ratio}


def check_forecasters(*, t: int = 240, predictors: int = 4, seed: int = 0) -> tuple[bool, dict]:
    rng = named_rng(seed, "eval_forecasters")
    Z = rng.standard_normal((t, predictors))
    r = 0.01 + Z @ rng.normal(0.0, 0.02, predictors) + 0.05 * rng.standard_normal(t)

    sparse = bool(np.all(fit_lasso(Z, r, lambda_max(Z, r)).theta[1:] == 0.0))
    ols = fit_ols(Z, r)
    lasso_gap = float(np.max(np.abs(fit_lasso(Z, r, 0.0).theta - ols)))
    pcr_gap = float(np.max(np.abs(fit_pcr(Z, r, predictors).predict(Z) - predict_linear(ols, Z))))

    n = 120
    periods = tuple(str(p) for p in pd.period_range("2000-01", periods=n + 24, freq="M"))
    factors = rng.standard_normal((n + 24, 2))
    returns = 0.02 * rng.standard_normal(n + 24)

    def panel(rows: int) -> SectorPanel:
        return SectorPanel("10", periods[:rows], returns[:rows], returns[:rows], ("f1", "f2"), factors[:rows])

    specs = [ForecasterSpec(kind="ols"), ForecasterSpec(kind="lasso"), ForecasterSpec(kind="pcr")]
    schedule = RollingSchedule(train_length=48, refit_every=12)
    short = run_schedule(panel(n), specs, schedule)
    long = run_schedule(panel(n + 24), specs, schedule)
    leak_free = bool(np.allclose(short.forecasts, long.forecasts[: short.periods], rtol=0.0, atol=1e-14))

    passed = sparse and lasso_gap < 1e-6 and pcr_gap < 1e-8 and leak_free
    return passed, {
        "lasso_sparse_at_lambda_max": sparse,
        "lasso_zero_vs_ols": lasso_gap,
        "pcr_full_vs_ols": pcr_gap,
        "leak_free": leak_free,
    }


def check_portfolio(*, seed: int = 0) -> tuple[bool, dict]:
    r = pd.Series([0.02, -0.01, 0.03, -0.04, 0.01, 0.02, -0.02, 0.05, 0.00, -0.01, 0.02, 0.01])
    stats = perf_stats(r)
    x = r.to_numpy()
    sharpe = 12 * x.mean() / (np.sqrt(12) * x.std(ddof=1))
    downside = np.sqrt(12) * np.sqrt(np.mean(np.minimum(x, 0.0) ** 2))
    wealth = np.cumprod(1 + x)
    mdd = float(np.max(1 - wealth / np.maximum.accumulate(wealth)))
    errors = {
        "sharpe": abs(stats.sharpe - sharpe),
        "sortino": abs(sortino(r) - 12 * x.mean() / downside),
        "max_drawdown": abs(max_drawdown(r) - mdd),
    }

    weights = pd.DataFrame({"a": [1.0, 0.0], "b": [0.0, 1.0]}, index=["2000-01", "2000-02"])
    rets = pd.DataFrame({"a": [0.1, 0.0], "b": [0.0, 0.0]}, index=weights.index)
    errors["turnover"] = abs(float(turnover(weights, rets).iloc[1]) - 2.0)

    rng = named_rng(seed, "eval_white")
    X = np.column_stack([np.ones(200), rng.standard_normal(200)])
    e = rng.standard_normal(200) * (1.0 + np.abs(X[:, 1]))
    bread = np.linalg.inv(X.T @ X)
    white = bread @ (X.T * e**2) @ X @ bread
    errors["newey_west_lag0"] = float(np.max(np.abs(newey_west_cov(X, e, 0) - white)))

    passed = all(v < 1e-12 for k, v in errors.items() if k != "newey_west_lag0") and errors["newey_west_lag0"] < 1e-10
    return passed, errors


def check_determinism(*, months: int = 480, sectors: int = 6, models: int = 3, seed: int = 7) -> tuple[bool, dict]:
    overrides = {
        "seed": seed,
        "synth_months": months,
        "synth_sectors": sectors,
        "synth_models": models,
        "train_length": max(24, months // 4),
    }
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [Path(tmp) / "a", Path(tmp) / "b"]
        for d in dirs:
            run_pipeline(load_config(None, {**overrides, "out_dir": str(d)}))
        names = sorted(p.name for p in dirs[0].iterdir())
        _, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
        report = (dirs[0] / REPORT_FILE).read_text(encoding="utf-8")
        perf_columns = pd.read_csv(dirs[0] / PERF_FILE, comment="#", index_col=0).columns
    sections = all(h in report for h in ("## Performance", "## Alphas", "## Subsamples", "## Regret Diagnostics"))
    net = all(f"Top Net {c}BPs" in perf_columns for c in (5, 10, 15))
    passed = not mismatch and not errors and sections and net
    return passed, {"files": len(names), "mismatched": mismatch + errors, "sections": sections, "net_columns": net}
