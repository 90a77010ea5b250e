"""
Pipeline stages.

synth -> aggregate -> forecast -> ensemble -> backtest -> report. Each stage
reads what earlier stages wrote to the output directory, so any stage can be
rerun on its own. Sectors fan out to a joblib worker pool and results are
gathered in sector order, so outputs do not depend on the worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src import error_codes
from src.alphas import (
    FACTOR_MODELS,
    date_split,
    factor_alphas,
    moving_average_sign,
    prior_month_sign,
    significance_stars,
    subsample_stats,
)
from src.artifacts import markdown_table, fmt, render_report, write_json, write_report, write_table
from src.config import RunConfig
from src.errors import DataValidationError, EnsembleError, InsufficientHistoryError, NumericalError
from src.ingest import load_asset_panel, load_factor_returns, load_predictions, load_sector_panel
from src.logging_utils import log_event
from src.portfolio import (
    TOP_BOTTOM,
    apply_costs,
    assign_buckets,
    bucket_predictions,
    bucket_returns,
    bucket_weights,
    cumulative_long,
    drawdown_long,
    equal_weight_benchmark,
    market_benchmark,
    perf_table,
    turnover,
)
from src.regret import lemma1_check, regret_table
from src.schedule import run_schedule
from src.schemas import AssetPanel, PredictionPanel, SectorPanel, merge_panels
from src.scoring import r2_oos, r2_table, simple_average
from src.sectors import WindowedFactors, build_sector_panels, sector_returns
from src.synthetic import generate_synthetic
from src.weights import run_ensemble

STAGES = ("synth", "aggregate", "forecast", "ensemble", "backtest", "report")

ASSETS_FILE = "assets.csv"
FACTOR_VALUES_FILE = "factor_values.csv"
FACTOR_RETURNS_FILE = "factor_returns.csv"
TRUTH_FILE = "truth.csv"
SECTOR_RETURNS_FILE = "returns_by_sector.csv"
SECTOR_PANEL_GLOB = "sector_*.csv"
PREDICTIONS_FILE = "predictions.csv"
ENSEMBLE_FILE = "ensemble_predictions.csv"
WEIGHTS_FILE = "weights.csv"
REGRET_FILE = "regret.csv"
R2_FILE = "r2_table.csv"
PORTFOLIO_FILE = "portfolio_returns.csv"
PERF_FILE = "perf_stats.csv"
PERF_RECENT_FILE = "perf_stats_recent.csv"
ALPHAS_FILE = "alphas.csv"
SUBSAMPLES_FILE = "subsamples.csv"
CUMULATIVE_FILE = "cumulative.csv"
DRAWDOWN_FILE = "drawdowns.csv"
REPORT_FILE = "report.md"
FAILURE_FILE = "failure.json"

ETA_KINDS = ("fixed", "cor3", "cor5", "feasible")
ALPHA_ROWS = {"Excess return": "excess", "CAPM alpha": "capm", "3F alpha": "ff3", "4F alpha": "carhart4"}


@dataclass(frozen=True)
class RunContext:
    config: RunConfig

    @property
    def out_dir(self) -> Path:
        return Path(self.config.out_dir)

    @property
    def config_hash(self) -> str:
        return self.config.config_hash

    @property
    def run_id(self) -> str:
        return self.config_hash[:12]

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write(self, name: str, frame: pd.DataFrame, stage: str, *, index: bool = False) -> str:
        return write_table(
            self.path(name), frame, config_hash=self.config_hash, seed=self.config.seed, stage=stage, index=index
        )

    def read(self, name: str, *, index_col=None) -> pd.DataFrame:
        path = self.path(name)
        if not path.exists():
            raise DataValidationError(
                f"{name} not found in {self.out_dir}; run the earlier stages first", code=error_codes.FILE_NOT_FOUND
            )
        return pd.read_csv(path, comment="#", dtype={"period": str, "sector_id": str}, index_col=index_col)


# --- input resolution ---


def _asset_paths(ctx: RunContext) -> tuple[Path, Path]:
    if ctx.config.asset_file is not None:
        return Path(ctx.config.asset_file), Path(ctx.config.factor_values_file)
    return ctx.path(ASSETS_FILE), ctx.path(FACTOR_VALUES_FILE)


def _load_assets(ctx: RunContext) -> AssetPanel:
    returns_path, values_path = _asset_paths(ctx)
    return load_asset_panel(returns_path, values_path)


def _factor_returns(ctx: RunContext) -> pd.DataFrame | None:
    if ctx.config.factor_returns_file is not None:
        return load_factor_returns(ctx.config.factor_returns_file)
    if ctx.config.uses_synthetic and ctx.path(FACTOR_RETURNS_FILE).exists():
        return load_factor_returns(ctx.path(FACTOR_RETURNS_FILE))
    return None


def _sector_panels(ctx: RunContext) -> dict[str, SectorPanel]:
    panels = {}
    for path in sorted(ctx.out_dir.glob(SECTOR_PANEL_GLOB)):
        panel = load_sector_panel(path)
        panels[panel.sector_id] = panel
    return panels


# --- synth ---


def stage_synth(ctx: RunContext) -> list[str]:
    data = generate_synthetic(ctx.config.synthetic_spec)
    return [
        ctx.write(ASSETS_FILE, data.panel.observations, "synth"),
        ctx.write(FACTOR_VALUES_FILE, data.panel.factor_values, "synth"),
        ctx.write(FACTOR_RETURNS_FILE, data.factor_returns, "synth", index=True),
        ctx.write(TRUTH_FILE, data.truth.to_frame(), "synth"),
    ]


# --- aggregate ---


def stage_aggregate(ctx: RunContext) -> list[str]:
    panel = _load_assets(ctx)
    for stale in ctx.out_dir.glob(SECTOR_PANEL_GLOB):
        stale.unlink()
    panels = build_sector_panels(panel)
    if not panels:
        raise DataValidationError("no sector has any assets", code=error_codes.EMPTY_SECTOR)
    paths = [ctx.write(f"sector_{sid}.csv", sp.to_frame(), "aggregate") for sid, sp in sorted(panels.items())]
    table = sector_returns(panel, ctx.config.weighting).returns
    table.index.name = "period"
    paths.append(ctx.write(SECTOR_RETURNS_FILE, table, "aggregate", index=True))
    return paths


# --- forecast ---


def forecast_sector(
    sector_panel: SectorPanel, config: RunConfig, asset_panel: AssetPanel | None = None
) -> PredictionPanel | None:
    """Rolling out-of-sample forecasts for one sector; None when its history is too short."""
    source = None
    if asset_panel is not None and config.factor_fit == "window":
        source = WindowedFactors(asset_panel, sector_panel.sector_id, sector_panel.factor_names, mode="window")
    try:
        return run_schedule(
            sector_panel,
            config.forecaster_specs,
            config.schedule,
            weighting=config.weighting,
            factor_source=source,
        )
    except InsufficientHistoryError as e:
        log_event("sector_skipped", sector_id=sector_panel.sector_id, reason=str(e), code=e.code)
        return None


def prediction_frame(panel: PredictionPanel) -> pd.DataFrame:
    """Long rows (period, sector_id, model_id, forecast, realized) for available entries."""
    rows, cols = np.nonzero(panel.available)
    return pd.DataFrame(
        {
            "period": np.asarray(panel.period_ids, dtype=object)[rows],
            "sector_id": panel.sector_id,
            "model_id": np.asarray(panel.model_ids, dtype=object)[cols],
            "forecast": panel.forecasts[rows, cols],
            "realized": panel.realized[rows],
        }
    )


def stage_forecast(ctx: RunContext) -> list[str]:
    config = ctx.config
    sector_panels = _sector_panels(ctx)
    if not sector_panels:
        raise DataValidationError("no sector panels; run the aggregate stage first", code=error_codes.FILE_NOT_FOUND)
    asset_panel = _load_assets(ctx) if config.factor_fit == "window" else None
    results = Parallel(n_jobs=config.workers)(
        delayed(forecast_sector)(sp, config, asset_panel) for _, sp in sorted(sector_panels.items())
    )
    frames = [prediction_frame(p) for p in results if p is not None]
    if not frames:
        raise InsufficientHistoryError(
            f"no sector has more than {config.train_length + 1} periods", code=error_codes.INSUFFICIENT_HISTORY
        )
    return [ctx.write(PREDICTIONS_FILE, pd.concat(frames, ignore_index=True), "forecast")]


# --- ensemble ---


@dataclass(frozen=True)
class SectorEnsemble:
    sector_id: str
    panel: PredictionPanel
    combined: dict[str, np.ndarray]
    weights: pd.DataFrame
    regret: pd.DataFrame
    r2: pd.DataFrame
    snapshot: list[dict]


def _eta_kinds(config: RunConfig) -> list[str]:
    wanted = {"cor3", "cor5", "feasible", config.eta_policy}
    return [k for k in ETA_KINDS if k in wanted]


def ensemble_sector(panel: PredictionPanel, config: RunConfig, warmup_returns=None) -> SectorEnsemble:
    """
    MWUM under the configured learning-rate policy plus the comparison
    variants, the simple average, per-model R² and regret diagnostics.
    """
    sector = panel.sector_id
    keep = [m for m in panel.model_ids if m not in set(config.ensemble_exclude)]
    if not keep:
        raise DataValidationError(
            f"sector {sector}: every model is excluded from the ensemble", code=error_codes.CONFIG_INVALID
        )
    members = panel.select_models(keep)

    combined = {"simple_average": simple_average(members)}
    main = None
    for kind in _eta_kinds(config):
        policy = config.eta_settings.model_copy(update={"kind": kind})
        state, trace = run_ensemble(
            members,
            policy,
            eviction=config.eviction_settings,
            min_obs=config.min_obs,
            sigma2_window=config.sigma2_window,
            warmup_returns=warmup_returns,
        )
        combined[f"mwum_{kind}"] = trace.combined
        if kind == config.eta_policy:
            main = (state, trace)
    state, trace = main
    combined["ensemble"] = trace.combined

    rows, cols = np.meshgrid(np.arange(members.periods), np.arange(members.models), indexing="ij")
    weights = pd.DataFrame(
        {
            "period": np.asarray(members.period_ids, dtype=object)[rows.ravel()],
            "sector_id": sector,
            "model_id": np.asarray(members.model_ids, dtype=object)[cols.ravel()],
            "weight": trace.weights.ravel(),
            "eta": np.repeat(trace.eta, members.models),
            "sigma2": np.repeat(trace.sigma2, members.models),
            "scored": np.repeat(trace.scored, members.models),
        }
    )

    diagnostics = regret_table(members, trace, ridge=config.ridge_jitter)
    regret = pd.DataFrame([d.as_row() for d in diagnostics])
    if not regret.empty:
        check = lemma1_check(members, trace)
        scored_upto = [int(trace.scored[: d_tau].sum()) for d_tau in _checkpoint_lengths(members, trace)]
        regret.insert(0, "sector_id", sector)
        regret.insert(1, "policy", config.eta_policy)
        regret["lemma1_discrepancy"] = [check.discrepancy[n - 1] for n in scored_upto]
        flags = [list(d.flags) for d in diagnostics]
        if check.flagged:
            flags[-1].append(error_codes.LEMMA1_DIVERGENT)
        regret["flags"] = [";".join(f) for f in flags]

    r2 = {**r2_table(panel), **{name: r2_oos(members.realized, c) for name, c in combined.items()}}
    r2_frame = pd.DataFrame(
        {
            "sector_id": sector,
            "model_id": list(r2),
            "kind": ["model" if m in panel.model_ids else "ensemble" for m in r2],
            "r2_oos": list(r2.values()),
        }
    )
    if state.evicted:
        log_event("models_evicted", sector_id=sector, models=sorted(state.model_ids[j] for j in state.evicted))
    return SectorEnsemble(
        sector_id=sector,
        panel=members,
        combined=combined,
        weights=weights,
        regret=regret,
        r2=r2_frame,
        snapshot=state.snapshot(),
    )


def _checkpoint_lengths(panel: PredictionPanel, trace) -> list[int]:
    # the prefix lengths regret_table reports, in order
    candidates = list(range(12, panel.periods, 12)) + [panel.periods]
    return [n for n in candidates if trace.scored[:n].sum() >= 2]


def _prediction_panels(ctx: RunContext) -> dict[str, PredictionPanel]:
    panels: dict[str, PredictionPanel] = {}
    if ctx.path(PREDICTIONS_FILE).exists():
        panels.update(load_predictions(ctx.path(PREDICTIONS_FILE)))
    for path in ctx.config.external_predictions:
        for sid, external in load_predictions(path).items():
            panels[sid] = merge_panels([panels[sid], external]) if sid in panels else external
            log_event("external_predictions_merged", sector_id=sid, path=str(path), models=list(external.model_ids))
    if not panels:
        raise DataValidationError(
            "no predictions found; run the forecast stage or configure external_predictions",
            code=error_codes.FILE_NOT_FOUND,
        )
    return panels


def _warmup(sector_panel: SectorPanel | None, panel: PredictionPanel, weighting: str):
    if sector_panel is None:
        return None
    first = panel.period_ids[0]
    before = [i for i, p in enumerate(sector_panel.period_ids) if p < first]
    return sector_panel.returns(weighting)[before] if before else None


def stage_ensemble(ctx: RunContext) -> list[str]:
    config = ctx.config
    panels = _prediction_panels(ctx)
    sector_panels = _sector_panels(ctx)
    results: list[SectorEnsemble] = Parallel(n_jobs=config.workers)(
        delayed(ensemble_sector)(panel, config, _warmup(sector_panels.get(sid), panel, config.weighting))
        for sid, panel in sorted(panels.items())
    )

    ensemble_frames = []
    for res in results:
        frame = pd.DataFrame(
            {"period": list(res.panel.period_ids), "sector_id": res.sector_id, "realized": res.panel.realized}
        )
        for name, values in res.combined.items():
            frame[name] = values
        ensemble_frames.append(frame)

    for stale in ctx.out_dir.glob("state_*.csv"):
        stale.unlink()
    paths = [
        ctx.write(ENSEMBLE_FILE, pd.concat(ensemble_frames, ignore_index=True), "ensemble"),
        ctx.write(WEIGHTS_FILE, pd.concat([r.weights for r in results], ignore_index=True), "ensemble"),
        ctx.write(REGRET_FILE, pd.concat([r.regret for r in results], ignore_index=True), "ensemble"),
        ctx.write(R2_FILE, pd.concat([r.r2 for r in results], ignore_index=True), "ensemble"),
    ]
    for res in results:
        paths.append(ctx.write(f"state_{res.sector_id}.csv", pd.DataFrame(res.snapshot), "ensemble"))
    return paths


# --- backtest ---


@dataclass(frozen=True)
class BacktestReport:
    returns: pd.DataFrame
    perf: pd.DataFrame
    perf_recent: pd.DataFrame | None
    alphas: pd.DataFrame
    subsamples: pd.DataFrame
    cumulative: pd.DataFrame
    drawdowns: pd.DataFrame


def _net_label(cost: float) -> str:
    return f"Top Net {cost:g}BPs"


def backtest(
    forecasts: pd.DataFrame,
    realized: pd.DataFrame,
    config: RunConfig,
    factor_returns: pd.DataFrame | None = None,
) -> BacktestReport:
    """
    Quantile portfolios from period × sector forecasts, with benchmarks,
    net-of-cost top portfolios, statistics, alphas and subsample means.
    """
    assignments = assign_buckets(forecasts, config.quantile_scheme)
    gross = bucket_returns(assignments, realized)
    labels = [c for c in gross.columns if c != TOP_BOTTOM]
    top, bottom = labels[-1], labels[0]

    top_weights = bucket_weights(assignments, top)
    top_turnover = turnover(top_weights, realized)
    net = {
        _net_label(c): apply_costs(gross[top], top_turnover, cost_bps=c, mode=config.cost_mode)
        for c in config.costs
    }

    columns: dict[str, pd.Series] = {}
    if factor_returns is not None and "mkt" in factor_returns.columns:
        columns["Market"] = market_benchmark(factor_returns, gross.index)
    columns["1/N"] = equal_weight_benchmark(realized.reindex(gross.index))
    for label in labels:
        columns[label] = gross[label]
    columns.update(net)

    returns = pd.DataFrame(columns, index=gross.index)
    if TOP_BOTTOM in gross.columns:
        returns[TOP_BOTTOM] = gross[TOP_BOTTOM]
    returns["turnover"] = top_turnover
    returns.index.name = "period"

    perf = perf_table(columns)
    perf.index.name = "statistic"
    perf_recent = None
    if config.recent_start or config.recent_end:
        perf_recent = perf_table(columns, start=config.recent_start, end=config.recent_end)
        perf_recent.index.name = "statistic"

    rf = pd.Series(0.0, index=gross.index)
    if factor_returns is not None and "rf" in factor_returns.columns:
        rf = factor_returns["rf"].reindex(gross.index).fillna(0.0)
    excess = {label: gross[label] - rf for label in labels}
    if TOP_BOTTOM in gross.columns:
        excess[TOP_BOTTOM] = gross[TOP_BOTTOM]

    alphas = _alpha_table(assignments, forecasts, labels, excess, factor_returns, config)
    subsamples = _subsample_table(
        {k: v for k, v in excess.items() if k in (bottom, top, TOP_BOTTOM)}, factor_returns, config
    )
    plotted = {k: v for k, v in columns.items() if v.notna().any()}
    return BacktestReport(
        returns=returns,
        perf=perf,
        perf_recent=perf_recent,
        alphas=alphas,
        subsamples=subsamples,
        cumulative=cumulative_long(plotted),
        drawdowns=drawdown_long(plotted),
    )


def _alpha_table(assignments, forecasts, labels, excess, factor_returns, config) -> pd.DataFrame:
    predicted = bucket_predictions(assignments, forecasts, labels)
    rows = [
        {"row": "Predicted return", "portfolio": name, "value": float(value), "t_stat": math.nan, "stars": ""}
        for name, value in predicted.items()
    ]
    factors = factor_returns if factor_returns is not None else pd.DataFrame(index=next(iter(excess.values())).index)
    for row, model in ALPHA_ROWS.items():
        if any(c not in factors.columns for c in FACTOR_MODELS[model]):
            log_event("alpha_skipped", model=model, reason="factor columns missing")
            continue
        for name, series in excess.items():
            try:
                result = factor_alphas(series, factors, model=model, nw_lags=config.nw_lags)
                value, t = result.alpha, result.t_stat
            except (DataValidationError, NumericalError) as e:
                log_event("alpha_undefined", model=model, portfolio=name, reason=str(e))
                value, t = math.nan, math.nan
            rows.append({"row": row, "portfolio": name, "value": value, "t_stat": t, "stars": significance_stars(t)})
    return pd.DataFrame(rows, columns=["row", "portfolio", "value", "t_stat", "stars"])


def _subsample_table(series: dict[str, pd.Series], factor_returns, config) -> pd.DataFrame:
    index = next(iter(series.values())).index
    indicators: dict[str, pd.Series] = {}
    if factor_returns is not None and "mkt" in factor_returns.columns:
        indicators["market_sign"] = prior_month_sign(factor_returns["mkt"]).reindex(index)
    if config.split_period:
        indicators["date_split"] = date_split(index, config.split_period)
    if factor_returns is not None and "activity" in factor_returns.columns:
        indicators["activity"] = moving_average_sign(factor_returns["activity"]).reindex(index)
    frames = []
    for ind_name, indicator in indicators.items():
        for name, s in series.items():
            table = subsample_stats(s, indicator, nw_lags=config.nw_lags)
            table.insert(0, "indicator", ind_name)
            table.insert(2, "portfolio", name)
            frames.append(table)
    if not frames:
        return pd.DataFrame(columns=["indicator", "subsample", "portfolio", "n", "mean", "t_stat"])
    return pd.concat(frames, ignore_index=True)


def stage_backtest(ctx: RunContext) -> list[str]:
    ens = ctx.read(ENSEMBLE_FILE)
    forecasts = ens.pivot(index="period", columns="sector_id", values="ensemble").sort_index()
    realized = ens.pivot(index="period", columns="sector_id", values="realized").sort_index()
    report = backtest(forecasts, realized, ctx.config, _factor_returns(ctx))
    paths = [
        ctx.write(PORTFOLIO_FILE, report.returns, "backtest", index=True),
        ctx.write(PERF_FILE, report.perf, "backtest", index=True),
        ctx.write(ALPHAS_FILE, report.alphas, "backtest"),
        ctx.write(SUBSAMPLES_FILE, report.subsamples, "backtest"),
        ctx.write(CUMULATIVE_FILE, report.cumulative, "backtest"),
        ctx.write(DRAWDOWN_FILE, report.drawdowns, "backtest"),
    ]
    if report.perf_recent is not None:
        paths.append(ctx.write(PERF_RECENT_FILE, report.perf_recent, "backtest", index=True))
    return paths


# --- report ---


def _alpha_cells(alphas: pd.DataFrame) -> pd.DataFrame:
    cells = alphas.assign(
        cell=[
            fmt(v) + s + ("" if not np.isfinite(t) else f" ({t:.2f})")
            for v, t, s in zip(alphas["value"], alphas["t_stat"], alphas["stars"].fillna(""))
        ]
    )
    order = list(dict.fromkeys(alphas["portfolio"]))
    rows = list(dict.fromkeys(alphas["row"]))
    return cells.pivot(index="row", columns="portfolio", values="cell").reindex(index=rows, columns=order)


def stage_report(ctx: RunContext) -> list[str]:
    r2 = ctx.read(R2_FILE)
    regret = ctx.read(REGRET_FILE)
    perf = ctx.read(PERF_FILE, index_col=0)
    alphas = ctx.read(ALPHAS_FILE)
    subsamples = ctx.read(SUBSAMPLES_FILE)

    r2_wide = r2.pivot(index="sector_id", columns="model_id", values="r2_oos")
    r2_wide = r2_wide.reindex(columns=list(dict.fromkeys(r2["model_id"])))
    r2_pct = 100.0 * r2_wide
    r2_pct.loc["Average"] = r2_pct.mean(axis=0)
    final = regret.groupby("sector_id", sort=True).tail(1).set_index("sector_id") if not regret.empty else regret
    regret_cols = [
        "tau", "r2_ensemble", "r2_star", "gap",
        "effective_bound", "effective_bound_r2", "bound_cor3", "bound_cor5", "eta",
    ]

    sections = [
        ("Run", f"- **Sectors:** {r2['sector_id'].nunique()}\n- **η policy:** {ctx.config.eta_policy}\n"
                f"- **Weighting:** {ctx.config.weighting}\n- **Cost mode:** {ctx.config.cost_mode}"),
        ("Out-of-Sample R² (%)", markdown_table(r2_pct, index_name="Sector", digits=2)),
        ("Regret Diagnostics", markdown_table(final[regret_cols], index_name="Sector") if not regret.empty else "None"),
        ("Performance", markdown_table(perf, index_name="Statistic")),
    ]
    if ctx.path(PERF_RECENT_FILE).exists():
        recent = ctx.read(PERF_RECENT_FILE, index_col=0)
        span = f"{ctx.config.recent_start or 'start'} to {ctx.config.recent_end or 'end'}"
        sections.append((f"Performance ({span})", markdown_table(recent, index_name="Statistic")))
    sections.append(("Alphas", markdown_table(_alpha_cells(alphas), index_name="")))
    if subsamples.empty:
        sections.append(("Subsamples", "None"))
    else:
        sub = subsamples.assign(cell=[f"{fmt(m)} ({fmt(t, 2)})" for m, t in zip(subsamples["mean"], subsamples["t_stat"])])
        counts = subsamples.groupby(["indicator", "subsample"], sort=False)["n"].first()
        wide = sub.pivot(index=["indicator", "subsample"], columns="portfolio", values="cell")
        wide = wide.reindex(index=counts.index, columns=list(dict.fromkeys(subsamples["portfolio"])))
        wide.insert(0, "No. of Obs.", counts.astype(int).astype(str))
        wide.index = [f"{i} / {s}" for i, s in wide.index]
        sections.append(("Subsamples", markdown_table(wide, index_name="Subsample")))

    content = render_report(
        title="Sector Ensemble Backtest",
        config_hash=ctx.config_hash,
        seed=ctx.config.seed,
        sections=sections,
    )
    return [write_report(ctx.path(REPORT_FILE), content)]


# --- driver ---


STAGE_FUNCS = {
    "synth": stage_synth,
    "aggregate": stage_aggregate,
    "forecast": stage_forecast,
    "ensemble": stage_ensemble,
    "backtest": stage_backtest,
    "report": stage_report,
}


def run_stage(ctx: RunContext, stage: str) -> list[str]:
    """Run one stage; on failure write failure.json tagged with the stage and re-raise."""
    if stage not in STAGE_FUNCS:
        raise DataValidationError(f"unknown stage {stage!r}", code=error_codes.CONFIG_INVALID)
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    log_event("stage_started", stage=stage, run_id=ctx.run_id)
    try:
        try:
            paths = STAGE_FUNCS[stage](ctx)
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"linear algebra failure: {e}", code=error_codes.SINGULAR_MATRIX) from e
    except EnsembleError as e:
        e.stage = e.stage or stage
        problem = e.to_problem(run_id=ctx.run_id)
        write_json(ctx.path(FAILURE_FILE), problem.model_dump())
        log_event("stage_failed", **problem.model_dump())
        raise
    log_event("stage_completed", stage=stage, run_id=ctx.run_id, artifacts=len(paths))
    return paths


def run_pipeline(config: RunConfig) -> dict[str, list[str]]:
    """Every stage in order (synth only without an asset file); paths written per stage."""
    ctx = RunContext(config)
    ctx.path(FAILURE_FILE).unlink(missing_ok=True)
    stages = [s for s in STAGES if s != "synth" or config.uses_synthetic]
    return {stage: run_stage(ctx, stage) for stage in stages}
