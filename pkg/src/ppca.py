"""
Probabilistic PCA fit by EM, tolerant of missing entries.

X is k×t: k variables observed over t samples (columns). Each column is
modeled as x = W f + μ + ε with f ~ N(0, I_q) and ε ~ N(0, σ² I_k). Missing
entries are marginalized: the E-step works on each column's observed rows
only, and the M-step solves for every row's loading and mean jointly over
the columns where that row is observed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from src import error_codes
from src.errors import DataValidationError
from src.logging_utils import log_event

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 1000
MIN_OBSERVED_FRACTION = 0.2
MONOTONE_SLACK = 1e-9
SIGMA2_FLOOR = 1e-12


@dataclass(frozen=True)
class PpcaModel:
    W: np.ndarray  # k×q
    mu: np.ndarray  # k
    sigma2: float
    F: np.ndarray  # q×t posterior mean scores
    loglik_trace: tuple[float, ...]
    converged: bool
    n_iter: int
    flags: tuple[str, ...] = ()

    @property
    def q(self) -> int:
        return self.W.shape[1]


def _validate(X: np.ndarray, q: int, min_observed_fraction: float) -> np.ndarray:
    if X.ndim != 2:
        raise DataValidationError("PPCA input must be a k×t matrix", code=error_codes.DIMENSION_MISMATCH)
    k, _ = X.shape
    if q < 1 or q >= k:
        raise DataValidationError(f"need 1 <= q < k, got q={q}, k={k}", code=error_codes.DIMENSION_MISMATCH)
    if np.isinf(X).any():
        raise DataValidationError("PPCA input contains infinities", code=error_codes.NON_FINITE)
    observed = ~np.isnan(X)
    if not observed.any(axis=1).all():
        raise DataValidationError("a PPCA row has no observed entry", code=error_codes.INSUFFICIENT_HISTORY)
    if not observed.any(axis=0).all():
        raise DataValidationError("a PPCA column has no observed entry", code=error_codes.INSUFFICIENT_HISTORY)
    fraction = observed.mean()
    if fraction < min_observed_fraction:
        raise DataValidationError(
            f"observed fraction {fraction:.3f} below {min_observed_fraction}",
            code=error_codes.INSUFFICIENT_HISTORY,
        )
    return observed


def _initial(X: np.ndarray, observed: np.ndarray, q: int, floor: float):
    """Closed-form PPCA on the mean-imputed matrix: leading left singular vectors, residual variance."""
    k, t = X.shape
    mu = np.nanmean(X, axis=1)
    centered = np.where(observed, X - mu[:, None], 0.0)
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    eig = s**2 / t
    eig = np.concatenate([eig, np.zeros(max(k - eig.size, 0))])
    sigma2 = max(float(eig[q:].sum()) / (k - q), floor)
    scale = np.sqrt(np.maximum(eig[:q] - sigma2, 0.0))
    return u[:, :q] * scale, mu, sigma2


def _e_step(X0: np.ndarray, observed: np.ndarray, W: np.ndarray, mu: np.ndarray, sigma2: float):
    """
    Posterior moments per column and the observed-data log-likelihood.

    X0 is X with missing entries set to zero.
    """
    q = W.shape[1]
    obs = observed.astype(float)
    resid = (X0 - mu[:, None]) * obs  # k×t
    gram = np.einsum("in,ia,ib->nab", obs, W, W)  # t×q×q
    m = gram + sigma2 * np.eye(q)
    proj = resid.T @ W  # t×q, W_Oᵀ e per column
    m_inv = np.linalg.inv(m)
    ef = np.einsum("nab,nb->na", m_inv, proj)
    eff = sigma2 * m_inv + np.einsum("na,nb->nab", ef, ef)

    n_obs = obs.sum(axis=0)
    _, logdet_m = np.linalg.slogdet(m)
    logdet_c = (n_obs - q) * math.log(sigma2) + logdet_m
    quad = ((resid**2).sum(axis=0) - np.einsum("na,na->n", proj, ef)) / sigma2
    loglik = -0.5 * float(np.sum(n_obs * math.log(2.0 * math.pi) + logdet_c + quad))
    return ef, eff, loglik


def _m_step(X0: np.ndarray, observed: np.ndarray, ef: np.ndarray, eff: np.ndarray, floor: float):
    """Joint update of [w_i; μ_i] per row, then σ²."""
    t, q = ef.shape
    obs = observed.astype(float)
    aug = np.concatenate([ef, np.ones((t, 1))], axis=1)  # t×(q+1)
    aug_outer = np.zeros((t, q + 1, q + 1))
    aug_outer[:, :q, :q] = eff
    aug_outer[:, :q, q] = ef
    aug_outer[:, q, :q] = ef
    aug_outer[:, q, q] = 1.0

    lhs = np.einsum("in,nab->iab", obs, aug_outer)  # k×(q+1)×(q+1)
    rhs = (X0 * obs) @ aug  # k×(q+1)
    coef = np.linalg.solve(lhs, rhs[:, :, None])[:, :, 0]
    W, mu = coef[:, :q], coef[:, q]

    total_sq = float(((X0 * obs) ** 2).sum())
    explained = float(np.einsum("ia,ia->", coef, rhs))
    sigma2 = max((total_sq - explained) / obs.sum(), floor)
    return W, mu, sigma2


def _fix_signs(W: np.ndarray, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    W = W.copy()
    F = F.copy()
    for j in range(W.shape[1]):
        lead = int(np.argmax(np.abs(W[:, j])))
        if W[lead, j] < 0.0:
            W[:, j] = -W[:, j]
            F[j] = -F[j]
    return W, F


def ppca_fit(
    X,
    q: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    *,
    min_observed_fraction: float = MIN_OBSERVED_FRACTION,
) -> PpcaModel:
    """
    Fit PPCA by EM on a k×t matrix with NaN marking missing entries.

    Stops when the relative log-likelihood change drops below `tol` or
    after `max_iter` iterations (best iterate returned, converged=False).
    """
    X = np.asarray(X, dtype=float)
    observed = _validate(X, q, min_observed_fraction)
    X0 = np.where(observed, X, 0.0)
    scale = float(np.nanvar(X)) if observed.sum() > 1 else 0.0
    floor = SIGMA2_FLOOR * max(scale, 1.0)

    W, mu, sigma2 = _initial(X, observed, q, floor)
    ef, eff, loglik = _e_step(X0, observed, W, mu, sigma2)
    trace = [loglik]
    best = (loglik, W, mu, sigma2, ef)
    flags: list[str] = []
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        W, mu, sigma2 = _m_step(X0, observed, ef, eff, floor)
        ef, eff, loglik = _e_step(X0, observed, W, mu, sigma2)
        prev = trace[-1]
        trace.append(loglik)
        if loglik > best[0]:
            best = (loglik, W, mu, sigma2, ef)
        if loglik < prev - MONOTONE_SLACK * max(1.0, abs(prev)):
            flags.append(error_codes.NOT_CONVERGED)
            log_event("ppca_loglik_decrease", iteration=n_iter, previous=prev, current=loglik)
            break
        if abs(loglik - prev) <= tol * max(1.0, abs(prev)):
            converged = True
            break
    if not converged and error_codes.NOT_CONVERGED not in flags:
        flags.append(error_codes.NOT_CONVERGED)
        log_event("ppca_not_converged", iterations=n_iter, loglik=trace[-1])
    if not converged:
        _, W, mu, sigma2, ef = best

    W, F = _fix_signs(W, ef.T)
    return PpcaModel(
        W=W,
        mu=mu,
        sigma2=float(sigma2),
        F=F,
        loglik_trace=tuple(trace),
        converged=converged,
        n_iter=n_iter,
        flags=tuple(flags),
    )


def ppca_scores(model: PpcaModel, X) -> np.ndarray:
    """Posterior mean scores (q×t) for the columns of X under a fitted model."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != model.W.shape[0]:
        raise DataValidationError(
            f"expected {model.W.shape[0]} rows, got {X.shape}", code=error_codes.DIMENSION_MISMATCH
        )
    observed = ~np.isnan(X)
    ef, _, _ = _e_step(np.where(observed, X, 0.0), observed, model.W, model.mu, model.sigma2)
    return ef.T


def ppca_impute(model: PpcaModel, X) -> np.ndarray:
    """Fill missing entries with W f̂ + μ; observed entries are returned untouched."""
    X = np.asarray(X, dtype=float)
    observed = ~np.isnan(X)
    if observed.all():
        return X.copy()
    recon = model.W @ ppca_scores(model, X) + model.mu[:, None]
    return np.where(observed, X, recon)
