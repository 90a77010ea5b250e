from __future__ import annotations

import os
import time

from evals.cases import EvalCase, load_cases
from evals.taxonomy import EVAL_CASE_ERROR
from src.logging_utils import log_event


def run_eval_case(case: EvalCase) -> dict:
    t0 = time.perf_counter()
    try:
        passed, detail = case.check(**case.params)
    except Exception as e:
        log_event("eval_case_error", case_id=case.case_id, error=str(e))
        return {
            "case_id": case.case_id,
            "pass": False,
            "error_code": EVAL_CASE_ERROR,
            "detail": {"error": f"{type(e).__name__}: {e}"},
            "seconds": time.perf_counter() - t0,
        }
    return {
        "case_id": case.case_id,
        "pass": bool(passed),
        "error_code": None if passed else case.error_code,
        "detail": detail,
        "seconds": time.perf_counter() - t0,
    }


def run_all(*, quick: bool = False, only: list[str] | None = None) -> dict:
    cases = [c for c in load_cases(quick=quick) if only is None or c.case_id in only]
    result = [run_eval_case(c) for c in cases]
    total = len(result)
    passed = sum(1 for r in result if r["pass"])
    failed = total - passed

    return {
        "total": total,
        "passed": passed,
        "failed": failed,
        "results": result,
    }


def format_report(out: dict) -> str:
    lines: list[str] = [f"EVAL SUMMARY: total={out['total']} passed={out['passed']} failed={out['failed']}"]
    if out["failed"] == 0:
        lines.append("ALL PASS")
        return "\n".join(lines)

    for r in out["results"]:
        if r["pass"]:
            continue
        lines.append("")
        lines.append(f"FAIL: {r['case_id']} ({r['error_code']})")
        lines.append(f"DETAIL: {r['detail']}")
    return "\n".join(lines)


def write_eval_report(out: dict, *, out_dir: str = "artifacts") -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "eval_report.md")

    breakdown: dict[str, int] = {}
    for r in out["results"]:
        if not r["pass"]:
            code = r.get("error_code") or "UNKNOWN"
            breakdown[code] = breakdown.get(code, 0) + 1

    pass_rate = out["passed"] / out["total"] if out["total"] else 0.0
    lines = [
        "# Eval Report",
        "",
        f"- total: {out['total']}",
        f"- passed: {out['passed']}",
        f"- failed: {out['failed']}",
        f"- pass_rate: {pass_rate:.2%}",
        "",
        "## Cases",
        "",
        "| Case | Result | Seconds | Detail |",
        "|------|--------|---------|--------|",
    ]
    for r in out["results"]:
        status = "PASS" if r["pass"] else f"FAIL {r['error_code']}"
        lines.append(f"| {r['case_id']} | {status} | {r['seconds']:.1f} | {r['detail']} |")
    lines.append("")
    lines.append("## Failures by Code")
    lines.append("")
    if breakdown:
        for code, count in sorted(breakdown.items()):
            lines.append(f"- {code}: {count}")
    else:
        lines.append("None")
    lines.append("")

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
    return path


if __name__ == "__main__":
    import sys

    results = run_all(quick="--quick" in sys.argv)
    print(format_report(results))
    print(f"[EVAL] report written to {write_eval_report(results)}")
    raise SystemExit(0 if results["failed"] == 0 else 1)
