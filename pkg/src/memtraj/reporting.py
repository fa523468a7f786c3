"""Bit-stable CSV emission and the per-command run report.

Every numeric cell is written with Python's shortest round-trip float
representation, so a CSV is byte-identical across runs whenever the
underlying doubles are.  Each file starts with '#' comment lines carrying
the artifact version and the full config echo.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


def format_value(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, columns, config_echo_json, extra_header=()):
    """Write named columns with a provenance header; returns the path."""
    names = list(columns)
    arrays = [np.asarray(columns[name]) for name in names]
    n_rows = arrays[0].shape[0] if arrays else 0
    if any(a.shape[0] != n_rows for a in arrays):
        raise ValueError("all CSV columns must have equal length")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# memtraj {__version__}\n")
        fh.write(f"# config: {config_echo_json}\n")
        for line in extra_header:
            fh.write(f"# {line}\n")
        fh.write(",".join(names) + "\n")
        for i in range(n_rows):
            fh.write(",".join(format_value(a[i]) for a in arrays) + "\n")
    return path


@dataclass
class RunReport:
    """Outcome of one CLI command: echo, outputs, summary metrics."""

    command: str
    config: dict
    outputs: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    status: str = "ok"
    version: str = __version__
    wall_time_s: float = 0.0

    def to_dict(self):
        return {
            "command": self.command,
            "config": self.config,
            "outputs": dict(self.outputs),
            "summary": dict(self.summary),
            "status": self.status,
            "version": self.version,
            "wall_time_s": self.wall_time_s,
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        self.outputs["report"] = str(path)
        return path


class Stopwatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False


def windowed_record(record, sample_indices):
    """Record averaged over each inter-sample window.

    Row 0 (t = 0) has no preceding window and reports 0; row k >= 1
    averages y over the steps in (t_{k-1}, t_k].  Averaging is what a
    finite-bandwidth data logger would store and is defined at every
    sampled row.
    """
    y = record.y
    out = np.zeros(len(sample_indices), dtype=float)
    for slot in range(1, len(sample_indices)):
        lo, hi = sample_indices[slot - 1], sample_indices[slot]
        out[slot] = float(np.mean(y[lo:hi]))
    return out
