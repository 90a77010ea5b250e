"""Stable failure and flag codes.

Used by: every src module, the CLI exit-code mapping, failure.json, evals.
"""

# Validation codes (exit code 2)
DIMENSION_MISMATCH = "DIMENSION_MISMATCH"
NON_FINITE = "NON_FINITE"
INVALID_WEIGHTS = "INVALID_WEIGHTS"
INSUFFICIENT_HISTORY = "INSUFFICIENT_HISTORY"
EMPTY_SECTOR = "EMPTY_SECTOR"
DUPLICATE_KEY = "DUPLICATE_KEY"
MISSING_HEADER = "MISSING_HEADER"
BAD_PERIOD = "BAD_PERIOD"
MISALIGNED = "MISALIGNED"
FACTOR_UNAVAILABLE = "FACTOR_UNAVAILABLE"
CONFIG_INVALID = "CONFIG_INVALID"
FILE_NOT_FOUND = "FILE_NOT_FOUND"

# Numerical codes (exit code 3)
SINGULAR_MATRIX = "SINGULAR_MATRIX"
RANK_DEFICIENT = "RANK_DEFICIENT"
ZERO_VOLATILITY = "ZERO_VOLATILITY"
UNDEFINED_R2 = "UNDEFINED_R2"
INVALID_ETA = "INVALID_ETA"

# Flags: non-fatal fallbacks reported alongside a value
ETA_DEFAULT = "ETA_DEFAULT"            # policy had no usable history, default eta used
ETA_DEGENERATE = "ETA_DEGENERATE"      # closed-form eta was zero, smallest grid value used
WARMUP = "WARMUP"                      # second moment not ready, uniform weights, no update
CAP_FALLBACK = "CAP_FALLBACK"          # no usable lagged caps, equal weighting used
RIDGE_USED = "RIDGE_USED"              # jitter added to the forecast second-moment matrix
NOT_CONVERGED = "NOT_CONVERGED"        # iterative solver stopped at max_iter
SHORT_SAMPLE = "SHORT_SAMPLE"          # fewer than 12 observations behind a statistic
SPEC_FAILED = "SPEC_FAILED"            # forecaster failed on a window, masked out
PSTAR_BOUND_VIOLATED = "PSTAR_BOUND_VIOLATED"  # ||p*||_2 exceeded min(1, delta_tau)
LEMMA1_DIVERGENT = "LEMMA1_DIVERGENT"  # average gain far from realized R2
PINV_USED = "PINV_USED"                # OLS design rank deficient, pseudo-inverse used
EVICTED = "EVICTED"
