# src/weights.py
"""
Online ensemble weight learning (multiplicative weights update).

Each period the ensemble combines forecasts with the current distribution
p = w / Σw, observes the realized return, scores every model with the
clipped gain m̃ and updates w_l ← w_l (1 + η m̃_l).

Weights are held as log-weights. With η ≤ 1/2 and |m̃| ≤ 1 every factor is
at least 1/2, so log w stays finite and w stays strictly positive no matter
how many steps are taken.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, field_validator

from src import error_codes
from src.errors import DataValidationError, InsufficientHistoryError, NumericalError
from src.gain import DEFAULT_MIN_OBS, SecondMomentEstimator, clip_gain, gain
from src.logging_utils import log_event
from src.regret import delta_from_moments
from src.schemas import EnsembleTrace, GainVector, PredictionPanel, WeightDistribution
from src.scoring import r2_oos

ETA_CAP = 0.5
DEFAULT_ETA_GRID = tuple(float(x) for x in np.geomspace(1e-3, ETA_CAP, 16))


class EtaPolicy(BaseModel):
    kind: Literal["fixed", "cor3", "cor5", "feasible"] = "feasible"
    eta: float = Field(default=ETA_CAP, gt=0.0, le=ETA_CAP)  # used by kind="fixed"
    grid: list[float] = Field(default_factory=lambda: list(DEFAULT_ETA_GRID), min_length=1)
    lookback: int = Field(default=12, ge=1)
    warm_start: bool = True

    @field_validator("grid")
    @classmethod
    def _grid_in_range(cls, grid: list[float]) -> list[float]:
        for eta in grid:
            if not 0.0 < eta <= ETA_CAP:
                raise ValueError(f"grid value {eta} outside (0, 1/2]")
        return sorted(set(float(eta) for eta in grid))


class EvictionPolicy(BaseModel):
    # naive_streak: trailing-window R² against r̂=0 negative for `streak` consecutive steps
    # clip_mass: cumulative clip overshoot per scored step above `clip_mass_rate`
    kind: Literal["off", "naive_streak", "clip_mass"] = "off"
    window: int = Field(default=24, ge=1)
    streak: int = Field(default=24, ge=1)
    clip_mass_rate: float = Field(default=0.5, gt=0.0)
    min_steps: int = Field(default=24, ge=1)


@dataclass(frozen=True)
class ReplayRecord:
    """One scored period, kept so the learning-rate search can replay the update."""

    log_w_before: np.ndarray
    forecasts: np.ndarray
    realized: float
    sigma2: float
    active: np.ndarray


@dataclass
class GainTotals:
    """Running Σ|m̃| and step count; all the closed-form rates need from the history."""

    abs_sum: np.ndarray
    count: int = 0

    def add(self, clipped: np.ndarray) -> None:
        self.abs_sum += np.abs(clipped)
        self.count += 1

    def mean_abs(self) -> np.ndarray:
        return self.abs_sum / self.count

    def __len__(self) -> int:
        return self.count


@dataclass(frozen=True)
class StepDiagnostics:
    combined: float
    weights: np.ndarray
    raw_gain: np.ndarray
    clipped_gain: np.ndarray
    eta: float
    sigma2: float
    scored: bool
    flags: tuple[str, ...] = ()


@dataclass
class EnsembleState:
    """
    Live ensemble for one sector. Single writer: `step` advances it in place.

    `evicted` holds model indices frozen at zero weight. `gain_history` keeps
    only the last `lookback` clipped gains; `gain_totals` carries the full sums.
    """

    model_ids: tuple[str, ...]
    log_w: np.ndarray
    eta_policy: EtaPolicy
    eviction: EvictionPolicy
    second_moment: SecondMomentEstimator
    t: int = 0
    evicted: set[int] = field(default_factory=set)
    gain_history: deque = field(default_factory=deque)
    gain_totals: GainTotals | None = None
    clip_mass: np.ndarray | None = None
    naive_streak: np.ndarray | None = None
    moment_a: np.ndarray | None = None
    moment_b: np.ndarray | None = None
    recent: deque = field(default_factory=deque)

    def __post_init__(self):
        n = len(self.model_ids)
        self.log_w = np.asarray(self.log_w, dtype=float).copy()
        if self.gain_totals is None:
            self.gain_totals = GainTotals(np.zeros(n))
        if self.clip_mass is None:
            self.clip_mass = np.zeros(n)
        if self.naive_streak is None:
            self.naive_streak = np.zeros(n, dtype=int)
        if self.moment_a is None:
            self.moment_a = np.zeros((n, n))
        if self.moment_b is None:
            self.moment_b = np.zeros(n)
        keep = max(self.eta_policy.lookback, self.eviction.window)
        self.recent = deque(self.recent, maxlen=keep)
        self.gain_history = deque(self.gain_history, maxlen=self.eta_policy.lookback)

    @property
    def models(self) -> int:
        return len(self.model_ids)

    @property
    def active(self) -> np.ndarray:
        mask = np.ones(self.models, dtype=bool)
        mask[list(self.evicted)] = False
        return mask

    @property
    def w(self) -> np.ndarray:
        """Weights rescaled so the largest active weight is 1."""
        return np.exp(self.log_w - self.log_w[self.active].max())

    @property
    def p(self) -> WeightDistribution:
        return _distribution(self.log_w, self.active)

    def snapshot(self) -> list[dict]:
        """Flat records, one per model, for the state snapshot file."""
        w = self.w
        grid = ";".join(repr(g) for g in self.eta_policy.grid)
        return [
            {
                "model_id": model_id,
                "w": float(w[j]),
                "log_w": float(self.log_w[j]),
                "evicted": j in self.evicted,
                "t": self.t,
                "eta_policy": self.eta_policy.kind,
                "eta": self.eta_policy.eta,
                "lookback": self.eta_policy.lookback,
                "warm_start": self.eta_policy.warm_start,
                "grid": grid,
            }
            for j, model_id in enumerate(self.model_ids)
        ]

    @classmethod
    def restore(
        cls,
        records: list[dict],
        *,
        eviction: EvictionPolicy | None = None,
        min_obs: int = DEFAULT_MIN_OBS,
        sigma2_window: int | None = None,
    ) -> EnsembleState:
        """
        Rebuild weights, eviction set, step counter and policy from snapshot records.

        Gain history and the second-moment estimator are not part of the
        snapshot; callers warm the estimator before stepping again.
        """
        if not records:
            raise DataValidationError("empty snapshot")
        first = records[0]
        grid = [float(g) for g in str(first["grid"]).split(";") if g]
        policy = EtaPolicy(
            kind=first["eta_policy"],
            eta=float(first["eta"]),
            lookback=int(first["lookback"]),
            grid=grid,
            warm_start=_flag(first.get("warm_start", True)),
        )
        return cls(
            model_ids=tuple(str(r["model_id"]) for r in records),
            log_w=np.array([float(r["log_w"]) for r in records]),
            eta_policy=policy,
            eviction=eviction or EvictionPolicy(),
            second_moment=SecondMomentEstimator(window=sigma2_window, min_obs=min_obs),
            t=int(first["t"]),
            evicted={j for j, r in enumerate(records) if _flag(r["evicted"])},
        )


def _flag(value) -> bool:
    return str(value).strip().lower() in ("true", "1")


def _distribution(log_w: np.ndarray, active: np.ndarray) -> WeightDistribution:
    shifted = np.where(active, log_w - log_w[active].max(), -np.inf)
    return WeightDistribution.from_weights(np.exp(shifted), active)


def init(
    n_models: int,
    eta_policy: EtaPolicy | None = None,
    *,
    model_ids=None,
    eviction: EvictionPolicy | None = None,
    min_obs: int = DEFAULT_MIN_OBS,
    sigma2_window: int | None = None,
) -> EnsembleState:
    """Fresh state: w = 1 for every model, uniform p, t = 0."""
    if n_models < 1:
        raise DataValidationError("an ensemble needs at least one model", code=error_codes.DIMENSION_MISMATCH)
    ids = tuple(model_ids) if model_ids is not None else tuple(f"m{j}" for j in range(n_models))
    if len(ids) != n_models:
        raise DataValidationError("model_ids must have one entry per model", code=error_codes.DIMENSION_MISMATCH)
    return EnsembleState(
        model_ids=ids,
        log_w=np.zeros(n_models),
        eta_policy=eta_policy or EtaPolicy(),
        eviction=eviction or EvictionPolicy(),
        second_moment=SecondMomentEstimator(window=sigma2_window, min_obs=min_obs),
    )


def clip_eta(eta: float) -> float:
    """min(1/2, η); non-positive rates are an error."""
    if not eta > 0.0 or not math.isfinite(eta):
        raise NumericalError(f"learning rate must be positive, got {eta!r}", code=error_codes.INVALID_ETA)
    return min(ETA_CAP, float(eta))


def _mean_abs_norm(gain_history: list[GainVector] | GainTotals) -> float:
    if isinstance(gain_history, GainTotals):
        return float(np.linalg.norm(gain_history.mean_abs()))
    stacked = np.vstack([np.abs(g.m) for g in gain_history])
    return float(np.linalg.norm(stacked.mean(axis=0)))


def _closed_form_eta(numerator: float, norm: float, grid) -> tuple[float, str | None]:
    if norm <= 0.0:
        return ETA_CAP, error_codes.ETA_DEFAULT
    eta = math.sqrt(max(numerator, 0.0) / norm)
    if eta <= 0.0:
        return float(min(grid)), error_codes.ETA_DEGENERATE
    return clip_eta(eta), None


def eta_cor3(
    gain_history: list[GainVector] | GainTotals, n_models: int, *, grid=DEFAULT_ETA_GRID
) -> tuple[float, str | None]:
    """
    η* = sqrt(log L / ‖(1/τ) Σ |m|‖₂), clipped to 1/2.

    Empty history returns 1/2 flagged ETA_DEFAULT. A single model gives
    η* = 0, replaced by the smallest grid value and flagged ETA_DEGENERATE.
    """
    if not gain_history:
        return ETA_CAP, error_codes.ETA_DEFAULT
    return _closed_form_eta(math.log(n_models), _mean_abs_norm(gain_history), grid)


def eta_cor5(
    gain_history: list[GainVector] | GainTotals, n_models: int, delta_tau: float, *, grid=DEFAULT_ETA_GRID
) -> tuple[float, str | None]:
    """η* = sqrt(log L · min(1, δ_τ) / ‖(1/τ) Σ |m|‖₂), clipped to 1/2."""
    if not gain_history:
        return ETA_CAP, error_codes.ETA_DEFAULT
    factor = min(1.0, max(float(delta_tau), 0.0))
    return _closed_form_eta(math.log(n_models) * factor, _mean_abs_norm(gain_history), grid)


def replay_grid(records: list[ReplayRecord], etas, *, warm_start: bool = True) -> np.ndarray:
    """
    Rerun the update over recorded periods once per candidate η.

    Returns the replayed combined forecasts, one row per η. Every row starts
    from the live log-weights at the first record (warm start) or from w = 1
    (cold start).
    """
    etas = np.asarray(etas, dtype=float).reshape(-1, 1)
    start = records[0].log_w_before if warm_start else np.zeros(records[0].forecasts.size)
    log_w = np.tile(start, (etas.shape[0], 1))
    combined = np.empty((etas.shape[0], len(records)))
    for i, rec in enumerate(records):
        idx = np.flatnonzero(rec.active)
        lw = log_w[:, idx]
        w = np.exp(lw - lw.max(axis=1, keepdims=True))
        p = w / w.sum(axis=1, keepdims=True)
        r_hat = rec.forecasts[idx]
        mix = p @ r_hat
        combined[:, i] = mix
        m = 1.0 - ((rec.realized - r_hat) ** 2 + r_hat * (mix[:, None] - r_hat)) / rec.sigma2
        log_w[:, idx] += np.log1p(etas * np.clip(m, -1.0, 1.0))
    return combined


def replay(records: list[ReplayRecord], eta: float, *, warm_start: bool = True) -> np.ndarray:
    return replay_grid(records, [eta], warm_start=warm_start)[0]


def eta_feasible(
    records: list[ReplayRecord], grid=DEFAULT_ETA_GRID, lookback: int = 12, *, warm_start: bool = True
) -> tuple[float, str | None]:
    """
    Grid η whose replayed ensemble had the highest R²_oos over the last `lookback` periods.

    Ties go to the smaller η. Fewer than `lookback` records returns the grid
    midpoint flagged ETA_DEFAULT.
    """
    grid = sorted(grid)
    if not grid:
        raise DataValidationError("empty learning-rate grid", code=error_codes.CONFIG_INVALID)
    if len(records) < lookback:
        return float(grid[len(grid) // 2]), error_codes.ETA_DEFAULT
    window = list(records)[-lookback:]
    realized = np.array([rec.realized for rec in window])
    if not float(realized @ realized) > 0.0:
        return float(grid[0]), None
    replayed = replay_grid(window, grid, warm_start=warm_start)
    best_eta, best_score = float(grid[0]), -math.inf
    for eta, combined in zip(grid, replayed):
        score = r2_oos(realized, combined)
        if score > best_score:
            best_eta, best_score = float(eta), score
    return best_eta, None


def delta_from_state(state: EnsembleState) -> tuple[float, str | None]:
    """δ_τ over the scored history of the active models; 1.0 flagged when unavailable."""

    idx = np.flatnonzero(state.active)
    if state.t == 0:
        return 1.0, error_codes.ETA_DEFAULT
    a = state.moment_a[np.ix_(idx, idx)] / state.t
    b = state.moment_b[idx] / state.t
    try:
        return delta_from_moments(a, b), None
    except NumericalError:
        return 1.0, error_codes.ETA_DEFAULT


def resolve_eta(state: EnsembleState) -> tuple[float, str | None]:
    policy = state.eta_policy
    n_active = int(state.active.sum())
    if policy.kind == "fixed":
        return clip_eta(policy.eta), None
    if policy.kind == "cor3":
        return eta_cor3(state.gain_totals, n_active, grid=policy.grid)
    if policy.kind == "cor5":
        delta, delta_flag = delta_from_state(state)
        eta, flag = eta_cor5(state.gain_totals, n_active, delta, grid=policy.grid)
        return eta, flag or delta_flag
    return eta_feasible(list(state.recent), policy.grid, policy.lookback, warm_start=policy.warm_start)


def evict_check(state: EnsembleState, policy: EvictionPolicy | None = None) -> set[int]:
    """
    Evicted set after applying the policy to the state's running statistics.

    At least one model is always kept.
    """
    policy = policy or state.eviction
    evicted = set(state.evicted)
    if policy.kind == "off":
        return evicted
    if policy.kind == "naive_streak":
        candidates = np.flatnonzero(state.naive_streak >= policy.streak)
    else:
        if state.t < policy.min_steps:
            return evicted
        candidates = np.flatnonzero(state.clip_mass / state.t > policy.clip_mass_rate)
    for j in candidates:
        if j in evicted:
            continue
        if len(evicted) + 1 >= state.models:
            break
        evicted.add(int(j))
    return evicted


def _update_naive_streak(state: EnsembleState) -> None:
    window = list(state.recent)[-state.eviction.window:]
    realized = np.array([rec.realized for rec in window])
    forecasts = np.vstack([rec.forecasts for rec in window])
    active = np.vstack([rec.active for rec in window])
    for j in range(state.models):
        rows = active[:, j]
        denom = float(realized[rows] @ realized[rows])
        if not rows.any() or denom <= 0.0:
            continue
        r2 = 1.0 - float(((realized[rows] - forecasts[rows, j]) ** 2).sum()) / denom
        state.naive_streak[j] = state.naive_streak[j] + 1 if r2 < 0.0 else 0


def step(
    state: EnsembleState,
    realized_t: float,
    forecasts_t,
    *,
    available=None,
    sigma2: float | None = None,
) -> tuple[EnsembleState, StepDiagnostics]:
    """
    One period: combine with the current p, score, resolve η, update.

    The combined forecast uses weights from strictly earlier periods. Before
    the second-moment estimate is ready the state is left unchanged apart
    from feeding the estimator, and the step is flagged WARMUP.
    """
    r_hat = np.asarray(forecasts_t, dtype=float)
    if r_hat.shape != (state.models,):
        raise DataValidationError(
            f"{r_hat.size} forecasts for {state.models} models", code=error_codes.DIMENSION_MISMATCH
        )
    active = state.active.copy()
    if available is not None:
        active &= np.asarray(available, dtype=bool)
    if not active.any():
        raise DataValidationError("no model forecast available this period", code=error_codes.DIMENSION_MISMATCH)
    if not np.all(np.isfinite(r_hat[active])) or not math.isfinite(realized_t):
        raise DataValidationError("non-finite forecast or return", code=error_codes.NON_FINITE)
    r_hat = np.where(active, r_hat, 0.0)
    realized_t = float(realized_t)

    p = _distribution(state.log_w, active)
    combined = float(r_hat @ p.p)
    nan_row = np.full(state.models, np.nan)

    if sigma2 is None:
        try:
            sigma2 = state.second_moment.value()
        except InsufficientHistoryError:
            state.second_moment.observe(realized_t)
            return state, StepDiagnostics(
                combined=combined,
                weights=p.p,
                raw_gain=nan_row,
                clipped_gain=nan_row,
                eta=math.nan,
                sigma2=math.nan,
                scored=False,
                flags=(error_codes.WARMUP,),
            )

    idx = np.flatnonzero(active)
    p_act = WeightDistribution.from_weights(p.p[idx])
    raw_act = gain(realized_t, r_hat[idx], p_act, sigma2)
    clipped_act = clip_gain(raw_act)

    raw = np.zeros(state.models)
    raw[idx] = raw_act.m
    clipped = np.zeros(state.models)
    clipped[idx] = clipped_act.m
    flags: list[str] = []

    state.recent.append(
        ReplayRecord(
            log_w_before=state.log_w.copy(),
            forecasts=r_hat.copy(),
            realized=realized_t,
            sigma2=float(sigma2),
            active=active.copy(),
        )
    )
    state.gain_history.append(GainVector(clipped))
    state.gain_totals.add(clipped)
    state.clip_mass[idx] += clipped_act.clip_mass
    state.moment_a += np.outer(r_hat, r_hat)
    state.moment_b += r_hat * realized_t
    state.t += 1

    eta, eta_flag = resolve_eta(state)
    if eta_flag:
        flags.append(eta_flag)
    state.log_w[idx] += np.log1p(eta * clipped_act.m)

    if state.eviction.kind == "naive_streak":
        _update_naive_streak(state)
    evicted = evict_check(state)
    for j in sorted(evicted - state.evicted):
        flags.append(error_codes.EVICTED)
        log_event("model_evicted", model_id=state.model_ids[j], t=state.t, policy=state.eviction.kind)
    state.evicted = evicted

    state.second_moment.observe(realized_t)
    raw_full = np.where(active, raw, np.nan)
    clipped_full = np.where(active, clipped, np.nan)
    return state, StepDiagnostics(
        combined=combined,
        weights=p.p,
        raw_gain=raw_full,
        clipped_gain=clipped_full,
        eta=eta,
        sigma2=float(sigma2),
        scored=True,
        flags=tuple(flags),
    )


def run_ensemble(
    panel: PredictionPanel,
    eta_policy: EtaPolicy | None = None,
    *,
    eviction: EvictionPolicy | None = None,
    min_obs: int = DEFAULT_MIN_OBS,
    sigma2_window: int | None = None,
    warmup_returns=None,
    fixed_sigma2: float | None = None,
) -> tuple[EnsembleState, EnsembleTrace]:
    """
    Step an ensemble through every period of a panel.

    `warmup_returns` feeds the second-moment estimator with returns observed
    before the panel starts (the training history), so scoring can begin at
    the first forecast. `fixed_sigma2` replaces the estimate with a constant.
    """
    state = init(
        panel.models,
        eta_policy,
        model_ids=panel.model_ids,
        eviction=eviction,
        min_obs=min_obs,
        sigma2_window=sigma2_window,
    )
    if warmup_returns is not None:
        state.second_moment.warm(warmup_returns)

    tau, n = panel.periods, panel.models
    combined = np.empty(tau)
    weights = np.empty((tau, n))
    raw = np.full((tau, n), np.nan)
    clipped = np.full((tau, n), np.nan)
    sigma2 = np.full(tau, np.nan)
    eta = np.full(tau, np.nan)
    scored = np.zeros(tau, dtype=bool)
    flags: list[tuple[str, ...]] = []
    for t in range(tau):
        state, diag = step(
            state,
            panel.realized[t],
            panel.forecasts[t],
            available=panel.available[t],
            sigma2=fixed_sigma2,
        )
        combined[t] = diag.combined
        weights[t] = diag.weights
        raw[t] = diag.raw_gain
        clipped[t] = diag.clipped_gain
        sigma2[t] = diag.sigma2
        eta[t] = diag.eta
        scored[t] = diag.scored
        flags.append(diag.flags)

    policy = state.eta_policy.kind
    defaulted = sum(1 for f, s in zip(flags, scored) if s and error_codes.ETA_DEFAULT in f)
    if defaulted:
        log_event("eta_default_used", sector_id=panel.sector_id, policy=policy, steps=defaulted)
    trace = EnsembleTrace(
        period_ids=panel.period_ids,
        model_ids=panel.model_ids,
        combined=combined,
        weights=weights,
        raw_gains=raw,
        clipped_gains=clipped,
        sigma2=sigma2,
        eta=eta,
        scored=scored,
        flags=tuple(flags),
        evicted=frozenset(state.model_ids[j] for j in state.evicted),
        policy=policy,
    )
    return state, trace
