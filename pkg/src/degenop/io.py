"""CSV/JSON writers and the atomic run manifest.

Numbers are written with 17 significant digits so doubles round-trip.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .calculus import GridSpec

FMT = "%.17g"


def _fmt(v) -> str:
    return FMT % v


def _write_text(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_rows(path, header, rows):
    """Write ``rows`` (sequences of numbers or strings) under a CSV header."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def write_snapshot_csv(path, grid: GridSpec, values: np.ndarray, components=None):
    """Node values as ``node_index,x1..xn,component,re,im`` (C-order nodes)."""
    values = np.asarray(values, dtype=complex).reshape(grid.n_nodes, -1)
    m = values.shape[1]
    comps = range(m) if components is None else components
    xs = np.stack([x.reshape(-1) for x in grid.mesh("x")], axis=1)
    header = ["node_index"] + [f"x{k + 1}" for k in range(grid.ndim)] + ["component", "re", "im"]
    lines = [",".join(header)]
    for node in range(grid.n_nodes):
        xcol = ",".join(_fmt(v) for v in xs[node])
        for c in comps:
            z = values[node, c]
            lines.append(f"{node},{xcol},{c},{_fmt(z.real)},{_fmt(z.imag)}")
    _write_text(path, "\n".join(lines) + "\n")


def read_snapshot_csv(path) -> dict:
    """Inverse of :func:`write_snapshot_csv`: ``{(node, component): complex}``."""
    out = {}
    with open(path) as fh:
        next(fh)
        for line in fh:
            parts = line.strip().split(",")
            out[(int(parts[0]), int(parts[-3]))] = complex(float(parts[-2]), float(parts[-1]))
    return out


def write_json(path, obj):
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    """Record of one run; :meth:`write` replaces the file atomically."""

    config_hash: str
    version: str
    command: str
    started: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    finished: str | None = None
    files: list = field(default_factory=list)
    exit_status: int = 0
    error: str | None = None

    def add(self, name: str):
        if name not in self.files:
            self.files.append(name)

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "version": self.version,
            "command": self.command,
            "started": self.started,
            "finished": self.finished,
            "files": list(self.files),
            "exit_status": self.exit_status,
            "error": self.error,
        }

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.finished = datetime.now(timezone.utc).isoformat()
        target = out_dir / "manifest.json"
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".manifest", suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, target)
        return target
