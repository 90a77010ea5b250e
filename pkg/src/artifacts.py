"""Delimited-text and markdown artifacts.

Every artifact opens with a '#' comment line carrying the config hash and
seed. Floats are written with 17 significant digits so a file read back
reproduces the exact values. Nothing time-dependent is written.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import pandas as pd

from src.logging_utils import log_event

FLOAT_FORMAT = "%.17g"


def header_line(*, config_hash: str, seed: int, stage: str | None = None) -> str:
    parts = [f"config_hash={config_hash}", f"seed={seed}"]
    if stage:
        parts.append(f"stage={stage}")
    return "# " + " ".join(parts) + "\n"


def read_header(path: str | Path) -> dict[str, str]:
    """Key/value pairs from an artifact's header comment; empty when there is none."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first.startswith("#"):
        return {}
    pairs = (token.split("=", 1) for token in first[1:].split() if "=" in token)
    return {k: v for k, v in pairs}


def write_table(
    path: str | Path,
    frame: pd.DataFrame,
    *,
    config_hash: str,
    seed: int,
    stage: str | None = None,
    index: bool = False,
) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = frame.to_csv(index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    path.write_text(header_line(config_hash=config_hash, seed=seed, stage=stage) + body, encoding="utf-8")
    log_event("artifact_written", path=str(path), rows=int(len(frame)), stage=stage)
    return str(path)


def write_json(path: str | Path, payload: dict) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    log_event("artifact_written", path=str(path))
    return str(path)


# --- markdown ---


def fmt(value, digits: int = 4) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    try:
        x = float(value)
    except (TypeError, ValueError):
        return str(value)
    if math.isnan(x):
        return "n/a"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{digits}f}"


def markdown_table(frame: pd.DataFrame, *, index_name: str = "", digits: int = 4) -> str:
    """Pipe table with the frame's index as the first column."""
    if frame.empty:
        return "No data"
    columns = [str(c) for c in frame.columns]
    lines = [
        "| " + " | ".join([index_name, *columns]) + " |",
        "|" + "|".join(["---"] * (len(columns) + 1)) + "|",
    ]
    for label, row in frame.iterrows():
        cells = [fmt(v, digits) for v in row.tolist()]
        lines.append("| " + " | ".join([str(label), *cells]) + " |")
    return "\n".join(lines)


def render_report(*, title: str, config_hash: str, seed: int, sections: list[tuple[str, str]]) -> str:
    lines = [
        f"<!-- config_hash={config_hash} seed={seed} -->",
        f"# {title}",
        "",
        f"- **Config hash:** `{config_hash}`",
        f"- **Seed:** {seed}",
        "",
    ]
    for heading, body in sections:
        lines.extend([f"## {heading}", body, ""])
    return "\n".join(lines)


def write_report(path: str | Path, content: str) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")
    log_event("artifact_written", path=str(path))
    return str(path)
