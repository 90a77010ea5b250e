from __future__ import annotations

from evals.cases import EvalCase, load_cases
from evals.runner import format_report, run_all, run_eval_case, write_eval_report
from evals.taxonomy import EVAL_CASE_ERROR, EVAL_PPCA

CASE_IDS = [
    "gain_identity",
    "lemma1_convergence",
    "optimal_ensemble_oracle",
    "regret_regime_switch",
    "feasible_beats_average",
    "simplex_invariants",
    "ppca",
    "forecaster_oracles",
    "portfolio_statistics",
    "pipeline_determinism",
]


def test_load_cases_ids_and_codes():
    cases = load_cases()
    assert [c.case_id for c in cases] == CASE_IDS
    for c in cases:
        assert c.description
        assert c.error_code.startswith("EVAL_")
        assert callable(c.check)


def test_quick_mode_swaps_params():
    full = {c.case_id: c for c in load_cases()}
    quick = {c.case_id: c for c in load_cases(quick=True)}
    assert full["gain_identity"].params == {"draws": 10_000}
    assert quick["gain_identity"].params == {"draws": 500}
    assert quick["pipeline_determinism"].params["months"] < full["pipeline_determinism"].params["months"]


def test_quick_params_keep_real_pass_thresholds():
    for c in load_cases(quick=True):
        assert c.params.get("rate", 1.0) > 0, c.case_id
        assert c.params.get("threshold", 1.0) > 0, c.case_id


def test_every_case_passes_in_quick_mode():
    out = run_all(quick=True)
    assert out["total"] == len(CASE_IDS)
    if out["failed"] != 0:
        first = next(r for r in out["results"] if not r["pass"])
        raise AssertionError(f"failed={out['failed']} first_case={first['case_id']} detail={first['detail']}")
    assert out["passed"] == len(CASE_IDS)
    assert format_report(out).endswith("ALL PASS")


def test_raising_check_is_reported_not_raised():
    def boom(**_):
        raise RuntimeError("no data")

    case = EvalCase(case_id="broken", description="raises", check=boom, error_code=EVAL_PPCA)
    result = run_eval_case(case)
    assert result["pass"] is False
    assert result["error_code"] == EVAL_CASE_ERROR
    assert "RuntimeError: no data" in result["detail"]["error"]


def test_failed_check_uses_case_code():
    case = EvalCase(case_id="off", description="fails", check=lambda **_: (False, {"gap": 1.0}), error_code=EVAL_PPCA)
    result = run_eval_case(case)
    assert result["error_code"] == EVAL_PPCA
    report = format_report({"total": 1, "passed": 0, "failed": 1, "results": [result]})
    assert "FAIL: off (EVAL_PPCA)" in report
    assert "'gap': 1.0" in report


def test_write_eval_report(tmp_path):
    out = {
        "total": 2,
        "passed": 1,
        "failed": 1,
        "results": [
            {"case_id": "a", "pass": True, "error_code": None, "detail": {}, "seconds": 0.1},
            {"case_id": "b", "pass": False, "error_code": EVAL_PPCA, "detail": {"x": 1}, "seconds": 0.2},
        ],
    }
    path = write_eval_report(out, out_dir=str(tmp_path))
    text = open(path, encoding="utf-8").read()
    assert "- pass_rate: 50.00%" in text
    assert "| b | FAIL EVAL_PPCA | 0.2 |" in text
    assert f"- {EVAL_PPCA}: 1" in text
