# evals/taxonomy.py
EVAL_CASE_ERROR = "EVAL_CASE_ERROR"

EVAL_GAIN_IDENTITY = "EVAL_GAIN_IDENTITY"
EVAL_LEMMA1_DIVERGENT = "EVAL_LEMMA1_DIVERGENT"
EVAL_ORACLE_MISMATCH = "EVAL_ORACLE_MISMATCH"
EVAL_REGRET_BOUND = "EVAL_REGRET_BOUND"
EVAL_ORDERING = "EVAL_ORDERING"
EVAL_SIMPLEX_INVARIANT = "EVAL_SIMPLEX_INVARIANT"
EVAL_PPCA = "EVAL_PPCA"
EVAL_FORECASTER_ORACLE = "EVAL_FORECASTER_ORACLE"
EVAL_PORTFOLIO_STATS = "EVAL_PORTFOLIO_STATS"
EVAL_DETERMINISM = "EVAL_DETERMINISM"
