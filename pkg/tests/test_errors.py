# tests/test_errors.py
from __future__ import annotations

import pytest

from src import error_codes
from src.errors import (
    DataValidationError,
    DimensionMismatchError,
    EnsembleError,
    FactorUnavailableError,
    InsufficientHistoryError,
    NumericalError,
    SingularMatrixError,
    ZeroVolatilityError,
)


@pytest.mark.parametrize(
    "cls, exit_code, code",
    [
        (DataValidationError, 2, error_codes.CONFIG_INVALID),
        (DimensionMismatchError, 2, error_codes.DIMENSION_MISMATCH),
        (InsufficientHistoryError, 2, error_codes.INSUFFICIENT_HISTORY),
        (FactorUnavailableError, 2, error_codes.FACTOR_UNAVAILABLE),
        (NumericalError, 3, error_codes.SINGULAR_MATRIX),
        (SingularMatrixError, 3, error_codes.SINGULAR_MATRIX),
        (ZeroVolatilityError, 3, error_codes.ZERO_VOLATILITY),
    ],
)
def test_exit_and_default_codes(cls, exit_code, code):
    err = cls("boom")
    assert isinstance(err, EnsembleError)
    assert err.exit_code == exit_code
    assert err.code == code
    assert str(err) == "boom"


def test_explicit_code_wins():
    err = DataValidationError("bad row", code=error_codes.NON_FINITE, stage="aggregate")
    assert err.code == error_codes.NON_FINITE
    assert err.stage == "aggregate"


def test_builtin_bases():
    assert isinstance(DataValidationError("x"), ValueError)
    assert isinstance(ZeroVolatilityError("x"), ArithmeticError)


def test_to_problem():
    err = ZeroVolatilityError("portfolio has zero volatility", stage="backtest")
    p = err.to_problem(run_id="abc123")
    assert p.model_dump() == {
        "status": 3,
        "code": error_codes.ZERO_VOLATILITY,
        "message": "portfolio has zero volatility",
        "stage": "backtest",
        "run_id": "abc123",
    }


def test_to_problem_without_stage_or_run():
    p = DataValidationError("missing", code=error_codes.FILE_NOT_FOUND).to_problem()
    assert p.status == 2
    assert p.stage is None and p.run_id is None
    assert p.code == error_codes.FILE_NOT_FOUND
