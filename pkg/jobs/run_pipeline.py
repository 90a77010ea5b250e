# jobs/run_pipeline.py
"""
Sector ensemble pipeline job.

Runs one stage or the whole pipeline against an output directory.

Usage:
    python -m jobs.run_pipeline run --config run.cfg --seed 7
    python -m jobs.run_pipeline forecast --config run.cfg --out artifacts/run
    python -m jobs.run_pipeline --stage ensemble --seed 7 --eta-policy cor5

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""
from __future__ import annotations

from dotenv import load_dotenv
load_dotenv()

import argparse

from src.config import load_config
from src.errors import EnsembleError
from src.logging_utils import log_event
from src.pipeline import STAGES, RunContext, run_pipeline, run_stage

COMMANDS = (*STAGES, "run")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="run_pipeline", description="Sector return ensemble pipeline")
    p.add_argument("command", nargs="?", choices=COMMANDS, default=None, help="stage to run (default: run)")
    p.add_argument("--stage", choices=COMMANDS, help="same as the positional command")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--eta-policy", choices=["fixed", "cor3", "cor5", "feasible"])
    p.add_argument("--weighting", choices=["equal", "cap"])
    p.add_argument("--costs", help="comma-separated cost levels in bps, e.g. 5,10,15")
    p.add_argument("--workers", type=int)
    p.add_argument(
        "--ridge-jitter", action="store_true", default=None, help="jitter an ill-conditioned forecast moment matrix"
    )
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    command = args.stage or args.command or "run"
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "eta_policy": args.eta_policy,
        "weighting": args.weighting,
        "costs": args.costs,
        "workers": args.workers,
        "ridge_jitter": args.ridge_jitter,
    }

    try:
        config = load_config(args.config, overrides)
    except EnsembleError as e:
        e.stage = e.stage or "config"
        print(f"[CONFIG] {e.code}: {e.message}")
        log_event("config_invalid", **e.to_problem().model_dump())
        return e.exit_code

    print(f"[RUN] command={command} out={config.out_dir} config_hash={config.config_hash[:12]} seed={config.seed}")
    try:
        if command == "run":
            written = run_pipeline(config)
        else:
            written = {command: run_stage(RunContext(config), command)}
    except EnsembleError as e:
        print(f"[{(e.stage or command).upper()}] FAILED {e.code}: {e.message}")
        return e.exit_code

    for stage, paths in written.items():
        print(f"[{stage.upper()}] wrote {len(paths)} file(s)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
