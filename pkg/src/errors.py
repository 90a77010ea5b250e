from __future__ import annotations

from pydantic import BaseModel

from src import error_codes


class ProblemDetails(BaseModel):
    status: int
    code: str
    message: str
    stage: str | None = None
    run_id: str | None = None


class EnsembleError(Exception):
    """Base error. `exit_code` is what the CLI returns when this aborts a stage."""

    exit_code = 1
    default_code = "ERROR"

    def __init__(self, message: str, *, code: str | None = None, stage: str | None = None):
        super().__init__(message)
        self.message = message
        self.code = code or self.default_code
        self.stage = stage

    def to_problem(self, *, run_id: str | None = None) -> ProblemDetails:
        return ProblemDetails(
            status=self.exit_code,
            code=self.code,
            message=self.message,
            stage=self.stage,
            run_id=run_id,
        )


class DataValidationError(EnsembleError, ValueError):
    exit_code = 2
    default_code = error_codes.CONFIG_INVALID


class NumericalError(EnsembleError, ArithmeticError):
    exit_code = 3
    default_code = error_codes.SINGULAR_MATRIX


class DimensionMismatchError(DataValidationError):
    default_code = error_codes.DIMENSION_MISMATCH


class InsufficientHistoryError(DataValidationError):
    default_code = error_codes.INSUFFICIENT_HISTORY


class FactorUnavailableError(DataValidationError):
    default_code = error_codes.FACTOR_UNAVAILABLE


class SingularMatrixError(NumericalError):
    default_code = error_codes.SINGULAR_MATRIX


class ZeroVolatilityError(NumericalError):
    default_code = error_codes.ZERO_VOLATILITY
