from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from evals import checks
from evals.taxonomy import (
    EVAL_DETERMINISM,
    EVAL_FORECASTER_ORACLE,
    EVAL_GAIN_IDENTITY,
    EVAL_LEMMA1_DIVERGENT,
    EVAL_ORACLE_MISMATCH,
    EVAL_ORDERING,
    EVAL_PORTFOLIO_STATS,
    EVAL_PPCA,
    EVAL_REGRET_BOUND,
    EVAL_SIMPLEX_INVARIANT,
)


@dataclass(frozen=True)
class EvalCase:
    case_id: str
    description: str
    check: Callable[..., tuple[bool, dict]]
    error_code: str
    params: dict = field(default_factory=dict)
    quick_params: dict = field(default_factory=dict)  # reduced sizes for the test suite


def load_cases(*, quick: bool = False) -> list[EvalCase]:
    cases: list[EvalCase] = []

    def add(case_id: str, description: str, check, error_code: str, params: dict, quick_params: dict) -> None:
        cases.append(
            EvalCase(
                case_id=case_id,
                description=description,
                check=check,
                error_code=error_code,
                params=quick_params if quick else params,
                quick_params=quick_params,
            )
        )

    add("gain_identity", "mᵀp = 1 - (r - r̃)²/σ² over random draws",
        checks.check_gain_identity, EVAL_GAIN_IDENTITY,
        {"draws": 10_000}, {"draws": 500})
    add("lemma1_convergence", "average gain tracks R²_oos under estimated σ̂²",
        checks.check_lemma1, EVAL_LEMMA1_DIVERGENT,
        {"seeds": 100, "tau": 5000, "early": 500, "threshold": 0.05},
        {"seeds": 10, "tau": 4000, "early": 100, "threshold": 0.1, "rate": 0.6})
    add("optimal_ensemble_oracle", "closed-form p* against projected gradient and random probes",
        checks.check_oracle, EVAL_ORACLE_MISMATCH,
        {"panels": 50, "tau": 200, "probes": 1000}, {"panels": 5, "tau": 200, "probes": 100})
    add("regret_regime_switch", "gap within the computable bound on a regime-switching stream",
        checks.check_regret, EVAL_REGRET_BOUND,
        {"seeds": 100, "tau": 2000}, {"seeds": 3, "tau": 600})
    add("feasible_beats_average", "feasible-η ensemble at least matches the simple average",
        checks.check_ordering, EVAL_ORDERING,
        {"seeds": 100, "tau": 2000}, {"seeds": 5, "tau": 600})
    add("simplex_invariants", "weights stay positive and normalized under adversarial gains",
        checks.check_simplex_invariants, EVAL_SIMPLEX_INVARIANT,
        {"steps": 100_000}, {"steps": 2_000})
    add("ppca", "subspace agreement, monotone EM and imputation error",
        checks.check_ppca, EVAL_PPCA,
        {"dims": (10, 30, 50)}, {"dims": (10,)})
    add("forecaster_oracles", "LASSO sparsity and OLS limits, PCR full rank, no look-ahead",
        checks.check_forecasters, EVAL_FORECASTER_ORACLE,
        {}, {})
    add("portfolio_statistics", "Sharpe, Sortino, drawdown, turnover and Newey-West lag 0",
        checks.check_portfolio, EVAL_PORTFOLIO_STATS,
        {}, {})
    add("pipeline_determinism", "byte-identical reruns with every report section",
        checks.check_determinism, EVAL_DETERMINISM,
        {"months": 480, "sectors": 6, "models": 3}, {"months": 120, "sectors": 4, "models": 3})

    return cases
