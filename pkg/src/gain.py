"""
Exploration/exploitation gain for the multiplicative-weights ensemble.

For one period with realized return r, forecasts r̂ (length L), weights p and
second-moment estimate σ̂²:

    m_l = 1 - (r - r̂_l)² / σ̂² - (Ξ·1)_l / σ̂²

where Ξ is the exploration matrix with Ξ_ij = r̂_i r̂_j p_j off the diagonal
and Ξ_ii = -r̂_i² (1 - p_i). Row sums reduce to r̂_i (r̃ - r̂_i) with
r̃ = r̂ᵀp, and the weighted gain satisfies mᵀp = 1 - (r - r̃)² / σ̂² exactly.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from src import error_codes
from src.errors import DataValidationError, DimensionMismatchError, InsufficientHistoryError
from src.schemas import GainVector, WeightDistribution, check_finite

DEFAULT_MIN_OBS = 12


def estimate_second_moment(past_returns, *, min_obs: int = DEFAULT_MIN_OBS, window: int | None = None) -> float:
    """
    Mean of squared past returns, (1/n) Σ r_s².

    Callers pass only returns strictly before the period being scored.
    `window` keeps the last `window` observations; None is expanding.
    """
    r = np.asarray(past_returns, dtype=float).ravel()
    if window is not None:
        r = r[-window:]
    if r.size < min_obs or r.size == 0:
        raise InsufficientHistoryError(f"{r.size} past returns, need at least {max(min_obs, 1)}")
    check_finite(r, "past returns")
    value = float(r @ r) / r.size
    if value <= 0.0:
        raise InsufficientHistoryError(
            "second moment is zero on an all-zero history", code=error_codes.INSUFFICIENT_HISTORY
        )
    return value


@dataclass
class SecondMomentEstimator:
    """
    Running σ̂² over observed returns. Single writer: the ensemble state that owns it.

    Keeps a running sum for the expanding window and a bounded deque for a
    fixed window, so each update is O(1).
    """

    window: int | None = None
    min_obs: int = DEFAULT_MIN_OBS
    count: int = 0
    sum_sq: float = 0.0
    _recent: deque = field(default_factory=deque, repr=False)

    def __post_init__(self):
        if self.window is not None and self.window < 1:
            raise DataValidationError("second-moment window must be positive")
        if self.window is not None:
            self._recent = deque(maxlen=self.window)

    def observe(self, r: float) -> None:
        r = float(r)
        if not np.isfinite(r):
            raise DataValidationError("non-finite return", code=error_codes.NON_FINITE)
        self.count += 1
        if self.window is None:
            self.sum_sq += r * r
        else:
            self._recent.append(r * r)

    def warm(self, returns) -> None:
        for r in np.asarray(returns, dtype=float).ravel():
            self.observe(r)

    @property
    def n(self) -> int:
        return self.count if self.window is None else len(self._recent)

    @property
    def ready(self) -> bool:
        return self.count >= self.min_obs and self._total() > 0.0

    def _total(self) -> float:
        return self.sum_sq if self.window is None else float(sum(self._recent))

    def value(self) -> float:
        if self.count < self.min_obs:
            raise InsufficientHistoryError(f"{self.count} past returns, need at least {self.min_obs}")
        total = self._total()
        if total <= 0.0:
            raise InsufficientHistoryError("second moment is zero on an all-zero history")
        return total / self.n


@dataclass(frozen=True)
class ExplorationMatrix:
    xi: np.ndarray

    @property
    def row_sums(self) -> np.ndarray:
        return self.xi.sum(axis=1)


def _check_inputs(forecasts_t, p: WeightDistribution) -> np.ndarray:
    r_hat = np.asarray(forecasts_t, dtype=float)
    if r_hat.shape != p.p.shape:
        raise DimensionMismatchError(f"{r_hat.size} forecasts for {p.p.size} weights")
    check_finite(r_hat, "forecasts")
    return r_hat


def exploration_matrix(forecasts_t, p: WeightDistribution) -> ExplorationMatrix:
    r_hat = _check_inputs(forecasts_t, p)
    xi = np.outer(r_hat, r_hat * p.p)
    np.fill_diagonal(xi, -(r_hat**2) * (1.0 - p.p))
    xi.setflags(write=False)
    return ExplorationMatrix(xi)


def exploration_row_sums(forecasts_t, p: WeightDistribution) -> np.ndarray:
    """(Ξ·1)_i in closed form, r̂_i (r̃ - r̂_i)."""
    r_hat = _check_inputs(forecasts_t, p)
    return r_hat * (r_hat @ p.p - r_hat)


def gain(realized_t: float, forecasts_t, p: WeightDistribution, sigma2: float) -> GainVector:
    """Unclipped gain vector for one period."""
    if not sigma2 > 0.0 or not np.isfinite(sigma2):
        raise DataValidationError(f"sigma2 must be positive, got {sigma2!r}", code=error_codes.NON_FINITE)
    r = float(realized_t)
    if not np.isfinite(r):
        raise DataValidationError("non-finite realized return", code=error_codes.NON_FINITE)
    r_hat = _check_inputs(forecasts_t, p)
    exploit = (r - r_hat) ** 2
    explore = exploration_row_sums(r_hat, p)
    return GainVector(1.0 - (exploit + explore) / sigma2)


def gain_slope(forecasts_t, sigma2: float) -> np.ndarray:
    """
    Derivative of the unclipped gain with respect to p.

    The gain is affine in p: m(p) - m(q) = -r̂ r̂ᵀ (p - q) / σ̂².
    """
    r_hat = np.asarray(forecasts_t, dtype=float)
    return -np.outer(r_hat, r_hat) / sigma2


def clip_gain(m: GainVector) -> GainVector:
    """Clamp every entry to [-1, 1], flagging clamped entries and recording the overshoot."""
    raw = m.m
    clipped = np.clip(raw, -1.0, 1.0)
    flags = clipped != raw
    mass = np.maximum(np.abs(raw) - 1.0, 0.0)
    return GainVector(clipped, clipped=flags | m.clipped, clip_mass=m.clip_mass + mass)
