"""Binary snapshots, NDJSON traces and CSV tables."""

from __future__ import annotations

import csv
import json
import os
import struct
from pathlib import Path

import numpy as np

from .lattice import GaugeField, Lattice

MAGIC = b"YMAF"
VERSION = 1
GROUP_SU2 = 1
_HEADER = struct.Struct("<4sI4IdIdd")

TRACE_KEYS = ("t", "action", "ym", "sup_f2", "charge", "dissipation", "dt_used")
ALPHA_TABLE_KEYS = ("alpha", "action_minus_vacuum", "ym", "sup_f2", "charge", "residual")


class SnapshotError(ValueError):
    """Malformed snapshot file."""


def write_snapshot(path, U, t=0.0, alpha=1.0):
    lat = U.lattice
    header = _HEADER.pack(MAGIC, VERSION, *lat.dims, lat.spacing, GROUP_SU2, float(t), float(alpha))
    payload = np.ascontiguousarray(U.links, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_snapshot(path):
    """Returns ``(field, t, alpha)``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotError(f"{path}: file too short for a header")
    magic, version, d0, d1, d2, d3, spacing, group, t, alpha = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported version {version}")
    if group != GROUP_SU2:
        raise SnapshotError(f"{path}: unsupported group id {group}")
    lat = Lattice((d0, d1, d2, d3), spacing)
    expected = 4 * lat.volume * 4 * 8
    payload = data[_HEADER.size:]
    if len(payload) != expected:
        raise SnapshotError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    links = np.frombuffer(payload, dtype="<f8").astype(float).reshape(lat.dims + (4, 4))
    return GaugeField(lat, links), t, alpha


def snapshot_name(index):
    return f"snap_{index:06d}.ymaf"


def read_series(directory):
    """All snapshots in ``directory``, ordered by flow time."""
    files = sorted(Path(directory).glob("*.ymaf"))
    if not files:
        raise FileNotFoundError(f"no snapshots in {directory}")
    items = [read_snapshot(f) for f in files]
    items.sort(key=lambda item: item[1])
    return items


class TraceWriter:
    """Append-only NDJSON; every line is flushed so a crash leaves valid JSON lines."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    def write(self, record):
        row = record.as_dict() if hasattr(record, "as_dict") else dict(record)
        self._fh.write(json.dumps({k: row[k] for k in TRACE_KEYS}) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trace(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_alpha_table(path, rows):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=ALPHA_TABLE_KEYS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in ALPHA_TABLE_KEYS})
