"""Data-file writers shared by the CLI commands.

All data files are deterministic given the run inputs; anything
time-dependent (timestamps, wall-clock timings) goes to the separate
``metadata.json`` so reruns with the same config and seed reproduce the
data files byte for byte.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .infomath import PriorGrid

__all__ = [
    "write_prior_csv",
    "write_hist_csv",
    "write_samples_csv",
    "write_trace_jsonl",
    "write_json",
    "write_metadata",
    "write_resolved_config",
    "histogram",
]


def write_prior_csv(path, prior: PriorGrid) -> None:
    lines = ["theta,weight"]
    for theta, weight in zip(prior.grid, prior.weights):
        lines.append(f"{theta:.12g},{weight:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")


def histogram(samples, bins: int, lo: float, hi: float):
    counts, edges = np.histogram(np.asarray(samples), bins=bins, range=(lo, hi))
    return edges[:-1], edges[1:], counts


def write_hist_csv(path, bin_lo, bin_hi, counts) -> None:
    lines = ["bin_lo,bin_hi,count"]
    for lo, hi, c in zip(bin_lo, bin_hi, counts):
        lines.append(f"{lo:.12g},{hi:.12g},{int(c)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_samples_csv(path, samples) -> None:
    lines = ["theta"]
    lines.extend(f"{theta:.17g}" for theta in np.asarray(samples))
    Path(path).write_text("\n".join(lines) + "\n")


def write_trace_jsonl(path, rows: list[dict]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_metadata(path, started: float, finished: float, extra: dict | None = None) -> None:
    payload = {
        "started_at": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "finished_at": datetime.fromtimestamp(finished, timezone.utc).isoformat(),
        "total_seconds": finished - started,
    }
    if extra:
        payload.update(extra)
    write_json(path, payload)


def write_resolved_config(outdir: Path, text: str) -> None:
    (outdir / "resolved_config.cfg").write_text(text)
