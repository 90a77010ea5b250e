"""
Hindsight-optimal ensemble and regret diagnostics.

The optimal fixed ensemble maximizes in-sample R²_oos subject to 1ᵀp = 1
(no sign constraint). With A = (1/τ) Σ r̂ r̂ᵀ and b = (1/τ) Σ r̂ r:

    ν  = (1ᵀA⁻¹b - 1) / (1ᵀA⁻¹1)
    p* = A⁻¹ (b - ν 1)
    δ_τ = ‖b - ν 1‖₂ / λ_min(A)

Bounds are reported, never enforced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from src import error_codes
from src.errors import DataValidationError, SingularMatrixError
from src.logging_utils import log_event
from src.schemas import EnsembleTrace, PredictionPanel
from src.scoring import r2_oos

MAX_CONDITION = 1e12
RIDGE_SCALE = 1e-10
LEMMA1_TOLERANCE = 0.05


@dataclass(frozen=True)
class OptimalEnsemble:
    p_star: np.ndarray
    delta_tau: float
    lambda_min: float
    r2_star: float
    condition_number: float
    ridge: float = 0.0
    warnings: tuple[str, ...] = ()

    @property
    def bound(self) -> float:
        return min(1.0, self.delta_tau)


@dataclass(frozen=True)
class RegretDiagnostics:
    tau: int
    avg_gain: float
    r2_ensemble: float
    r2_star: float
    gap: float
    effective_bound: float
    effective_bound_r2: float
    bound_cor3: float
    bound_cor5: float
    eta: float
    delta_tau: float
    flags: tuple[str, ...] = ()

    def as_row(self) -> dict:
        return {
            "tau": self.tau,
            "r2_ensemble": self.r2_ensemble,
            "r2_star": self.r2_star,
            "avg_gain": self.avg_gain,
            "effective_bound": self.effective_bound,
            "effective_bound_r2": self.effective_bound_r2,
            "eta": self.eta,
            "gap": self.gap,
            "bound_cor3": self.bound_cor3,
            "bound_cor5": self.bound_cor5,
            "delta_tau": self.delta_tau,
        }


@dataclass(frozen=True)
class Lemma1Check:
    discrepancy: np.ndarray
    flagged: bool


def forecast_moments(panel: PredictionPanel) -> tuple[np.ndarray, np.ndarray]:
    """A = (1/τ) Σ r̂_t r̂_tᵀ and b = (1/τ) Σ r̂_t r_t."""
    f = panel.forecasts
    tau = panel.periods
    return f.T @ f / tau, f.T @ panel.realized / tau


def _closed_form(a: np.ndarray, b: np.ndarray, *, ridge: bool, max_condition: float):
    n = a.shape[0]
    a = 0.5 * (a + a.T)
    eig = scipy.linalg.eigvalsh(a)
    lam_min, lam_max = float(eig[0]), float(eig[-1])
    cond = lam_max / lam_min if lam_min > 0.0 else math.inf
    jitter = 0.0
    if cond > max_condition:
        if not ridge:
            raise SingularMatrixError(
                f"forecast second-moment matrix is ill-conditioned (cond={cond:.3g}, "
                f"lambda_min={lam_min:.3g}); enable ridge jitter to proceed"
            )
        jitter = RIDGE_SCALE * float(np.trace(a)) / n
        if not jitter > 0.0:
            raise SingularMatrixError("forecast second-moment matrix is zero; ridge jitter cannot help")
        a = a + jitter * np.eye(n)
        eig = scipy.linalg.eigvalsh(a)
        lam_min, lam_max = float(eig[0]), float(eig[-1])
        cond = lam_max / lam_min
        log_event("ridge_jitter_used", jitter=jitter, condition_number=cond)
    factor = scipy.linalg.cho_factor(a)
    ones = np.ones(n)
    a_inv_b = scipy.linalg.cho_solve(factor, b)
    a_inv_1 = scipy.linalg.cho_solve(factor, ones)
    nu = (ones @ a_inv_b - 1.0) / (ones @ a_inv_1)
    bracket = b - nu * ones
    p_star = a_inv_b - nu * a_inv_1
    return p_star, bracket, lam_min, cond, jitter


def delta_from_moments(a: np.ndarray, b: np.ndarray, *, max_condition: float = MAX_CONDITION) -> float:
    """δ_τ from precomputed moments; raises SingularMatrixError when A is ill-conditioned."""
    _, bracket, lam_min, _, _ = _closed_form(np.atleast_2d(a), np.atleast_1d(b), ridge=False, max_condition=max_condition)
    return float(np.linalg.norm(bracket) / lam_min)


def optimal_weights(
    panel: PredictionPanel, *, ridge: bool = False, max_condition: float = MAX_CONDITION
) -> OptimalEnsemble:
    """
    Closed-form maximizer of in-sample R²_oos over the plane 1ᵀp = 1.

    When ‖p*‖₂ exceeds min(1, δ_τ) the result carries a
    PSTAR_BOUND_VIOLATED warning instead of failing.
    """
    a, b = forecast_moments(panel)
    p_star, bracket, lam_min, cond, jitter = _closed_form(a, b, ridge=ridge, max_condition=max_condition)
    delta = float(np.linalg.norm(bracket) / lam_min)
    warnings: list[str] = []
    if jitter > 0.0:
        warnings.append(error_codes.RIDGE_USED)
    if np.linalg.norm(p_star) > min(1.0, delta) + 1e-12:
        warnings.append(error_codes.PSTAR_BOUND_VIOLATED)
    r2_star = r2_oos(panel.realized, panel.forecasts @ p_star)
    return OptimalEnsemble(
        p_star=p_star,
        delta_tau=delta,
        lambda_min=lam_min,
        r2_star=r2_star,
        condition_number=cond,
        ridge=jitter,
        warnings=tuple(warnings),
    )


def delta_tau(panel: PredictionPanel, *, max_condition: float = MAX_CONDITION) -> float:
    a, b = forecast_moments(panel)
    return delta_from_moments(a, b, max_condition=max_condition)


def kkt_weights(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Minimum-norm solution of the equality-constrained least-squares KKT system

        [ A  1 ] [p]   [b]
        [ 1ᵀ 0 ] [ν] = [1]

    Used when A is singular and the closed form does not exist.
    """
    n = a.shape[0]
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = a
    kkt[:n, n] = 1.0
    kkt[n, :n] = 1.0
    rhs = np.concatenate([b, [1.0]])
    solution, *_ = scipy.linalg.lstsq(kkt, rhs)
    return solution[:n]


def _check_aligned(panel: PredictionPanel, trace: EnsembleTrace) -> None:
    if trace.period_ids != panel.period_ids or trace.model_ids != panel.model_ids:
        raise DataValidationError("trace is not aligned with the panel", code=error_codes.MISALIGNED)


def _scored_rows(panel: PredictionPanel, trace: EnsembleTrace, upto: int | None) -> np.ndarray:
    _check_aligned(panel, trace)
    rows = trace.scored.copy()
    if upto is not None:
        rows[upto:] = False
    if not rows.any():
        raise DataValidationError("no scored periods in the trace", code=error_codes.INSUFFICIENT_HISTORY)
    return rows


def regret_report(
    panel: PredictionPanel, trace: EnsembleTrace, *, upto: int | None = None, ridge: bool = False
) -> RegretDiagnostics:
    """
    Realized regret against the hindsight-optimal ensemble, with the
    computable bounds, over the scored periods (optionally the first `upto`
    panel periods only).

    `effective_bound` is (1/τ) Σ (p̂* − p_t)ᵀ r̂_t r̂_tᵀ p̂* in squared-return
    units. `effective_bound_r2` divides each term by the σ̂_t² the run used,
    which puts it in gain units, the units of `gap` and of the η-terms; the
    regret inequality gap ≤ effective_bound_r2 + bound_cor5 is stated on it.
    """
    rows = _scored_rows(panel, trace, upto)
    sub = panel.mask_rows(rows)
    tau = sub.periods
    n_models = sub.models
    flags: list[str] = []

    weights = trace.weights[rows]
    raw = np.nan_to_num(trace.raw_gains[rows])
    clipped = np.nan_to_num(trace.clipped_gains[rows])
    combined = trace.combined[rows]

    avg_gain = float(np.mean(np.sum(raw * weights, axis=1)))
    r2_ensemble = r2_oos(sub.realized, combined)

    try:
        opt = optimal_weights(sub, ridge=ridge)
        p_star, delta, r2_star = opt.p_star, opt.delta_tau, opt.r2_star
        flags.extend(opt.warnings)
    except SingularMatrixError:
        a, b = forecast_moments(sub)
        p_star = kkt_weights(a, b)
        delta = math.inf
        r2_star = r2_oos(sub.realized, sub.forecasts @ p_star)
        flags.append(error_codes.SINGULAR_MATRIX)

    star_fc = sub.forecasts @ p_star
    excess = (star_fc - combined) * star_fc
    effective_bound = float(np.mean(excess))
    effective_bound_r2 = float(np.mean(excess / trace.sigma2[rows]))
    norm = float(np.linalg.norm(np.abs(clipped).mean(axis=0)))
    eta = float(np.nanmean(trace.eta[rows]))
    log_l = math.log(n_models)
    tail = log_l / (tau * eta) if eta > 0.0 else math.inf
    bound_cor3 = eta * norm + tail
    bound_cor5 = eta * min(1.0, delta) * norm + tail

    return RegretDiagnostics(
        tau=tau,
        avg_gain=avg_gain,
        r2_ensemble=r2_ensemble,
        r2_star=r2_star,
        gap=r2_star - r2_ensemble,
        effective_bound=effective_bound,
        effective_bound_r2=effective_bound_r2,
        bound_cor3=bound_cor3,
        bound_cor5=bound_cor5,
        eta=eta,
        delta_tau=delta,
        flags=tuple(flags),
    )


def regret_table(
    panel: PredictionPanel, trace: EnsembleTrace, checkpoints=None, *, ridge: bool = False
) -> list[RegretDiagnostics]:
    """Diagnostics at several prefix lengths; defaults to every 12th period plus the full sample."""
    if checkpoints is None:
        checkpoints = list(range(12, panel.periods, 12)) + [panel.periods]
    out = []
    for upto in checkpoints:
        rows = trace.scored[:upto]
        if rows.sum() < 2:
            continue
        out.append(regret_report(panel, trace, upto=upto, ridge=ridge))
    return out


def lemma1_check(
    panel: PredictionPanel,
    trace: EnsembleTrace,
    sigma2_mode: str | float = "estimated",
    *,
    tolerance: float = LEMMA1_TOLERANCE,
) -> Lemma1Check:
    """
    Prefix discrepancy |R²_oos(τ') - (1/τ') Σ_{t≤τ'} m_tᵀp_t| over scored periods.

    sigma2_mode:
      "estimated": the σ̂_t² the run actually used
      "oracle":    each prefix's own second moment (1/τ') Σ r², where the
                   average gain equals R²_oos exactly
      float:       a constant σ² for every period
    """
    rows = _scored_rows(panel, trace, None)
    r = panel.realized[rows]
    weights = trace.weights[rows]
    raw = np.nan_to_num(trace.raw_gains[rows])
    sigma2 = trace.sigma2[rows]
    weighted_gain = np.sum(raw * weights, axis=1)
    # per-period weighted loss recovered from the gains: m_tᵀp_t = 1 - loss_t / σ̂_t²
    loss = (1.0 - weighted_gain) * sigma2

    counts = np.arange(1, r.size + 1)
    cum_sq_err = np.cumsum((r - trace.combined[rows]) ** 2)
    cum_sq_ret = np.cumsum(r**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2_prefix = 1.0 - cum_sq_err / cum_sq_ret
        if sigma2_mode == "estimated":
            avg = np.cumsum(weighted_gain) / counts
        elif sigma2_mode == "oracle":
            avg = 1.0 - (np.cumsum(loss) / counts) / (cum_sq_ret / counts)
        else:
            fixed = float(sigma2_mode)
            if not fixed > 0.0:
                raise DataValidationError("fixed sigma2 must be positive", code=error_codes.NON_FINITE)
            avg = 1.0 - np.cumsum(loss) / counts / fixed
    d = np.abs(r2_prefix - avg)
    flagged = bool(np.isfinite(d[-1]) and d[-1] > tolerance)
    if flagged:
        log_event("lemma1_divergent", sector_id=panel.sector_id, discrepancy=float(d[-1]))
    return Lemma1Check(discrepancy=d, flagged=flagged)
