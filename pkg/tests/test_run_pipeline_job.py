# tests/test_run_pipeline_job.py
from __future__ import annotations

from pathlib import Path

from jobs.run_pipeline import build_parser, main
from src.pipeline import FAILURE_FILE, REPORT_FILE

SMALL_CFG = str(Path(__file__).resolve().parents[1] / "fixtures" / "configs" / "small_run.cfg")


def test_parser_defaults_to_run():
    args = build_parser().parse_args([])
    assert args.command is None and args.stage is None
    assert args.ridge_jitter is None
    assert build_parser().parse_args(["--ridge-jitter"]).ridge_jitter is True


def test_full_run_returns_zero(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--config", SMALL_CFG, "--seed", "7", "--out", str(out)])
    printed = capsys.readouterr().out
    assert code == 0
    assert "[RUN] command=run" in printed
    assert "[REPORT] wrote 1 file(s)" in printed
    assert (out / REPORT_FILE).exists()


def test_stage_flag_runs_one_stage(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["--stage", "synth", "--config", SMALL_CFG, "--seed", "7", "--out", str(out)])
    assert code == 0
    assert "[SYNTH] wrote 4 file(s)" in capsys.readouterr().out
    assert not (out / REPORT_FILE).exists()


def test_missing_seed_is_config_error(tmp_path, capsys):
    code = main(["run", "--config", SMALL_CFG])
    assert code == 2
    assert "[CONFIG] CONFIG_INVALID" in capsys.readouterr().out


def test_missing_config_file(tmp_path, capsys):
    code = main(["--config", str(tmp_path / "nope.cfg"), "--seed", "1"])
    assert code == 2
    assert "[CONFIG] FILE_NOT_FOUND" in capsys.readouterr().out


def test_stage_without_inputs_fails_with_exit_2(tmp_path, capsys):
    code = main(["backtest", "--seed", "1"])
    assert code == 2
    assert "[BACKTEST] FAILED FILE_NOT_FOUND" in capsys.readouterr().out
    # out dir comes from SECTOR_ENSEMBLE_OUT
    assert (tmp_path / "run" / FAILURE_FILE).exists()
