"""CSV and JSON emitters plus the per-run manifest.

Floats are serialized with 17 significant digits so every table round-trips
bit-exactly through text.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "%.17g"


def format_value(value) -> str:
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def read_csv(path):
    """Header list plus float-coerced rows (strings kept where not numeric)."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for raw in reader:
            row = []
            for cell in raw:
                try:
                    row.append(float(cell))
                except ValueError:
                    row.append(cell)
            rows.append(row)
    return header, rows


def _jsonable(obj):
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    return obj


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        json.dump(_jsonable(payload), fh, indent=1)
        fh.write("\n")


@dataclass
class RunManifest:
    """Record of one command invocation: parameters, outputs, diagnostics."""

    command: str
    parameters: dict = field(default_factory=dict)
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    seed: int | None = None
    version: str = "unknown"
    status: str = "running"
    error: str | None = None
    wall_time_s: float = 0.0
    residuals: dict = field(default_factory=dict)
    started: float = field(default_factory=time.time)

    def add_output(self, path) -> str:
        p = str(path)
        if p not in self.outputs:
            self.outputs.append(p)
        return p

    def finish(self, path, status: str = "ok", error: str | None = None) -> None:
        self.status = status
        self.error = error
        self.wall_time_s = time.time() - self.started
        write_json(path, {
            "command": self.command,
            "parameters": self.parameters,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "seed": self.seed,
            "version": self.version,
            "status": self.status,
            "error": self.error,
            "wall_time_s": self.wall_time_s,
            "residuals": self.residuals,
        })
