"""CSV and JSON emission. Floats are written with 17 significant digits so
every value survives a text round trip exactly; timestamps only ever go to
JSON so CSV output is byte-stable for a fixed config and seed."""
from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .generators import ReferenceSolution
from .operators import bloch_vector
from .trajectories import TrajectoryRecord

FLOAT_FORMAT = "%.17g"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return FLOAT_FORMAT % float(x)


def entry_columns(d: int) -> list[str]:
    return [f"m_{x}{y}_{part}" for x in range(1, d + 1) for y in range(1, d + 1) for part in ("re", "im")]


def _entries(m: np.ndarray) -> list[float]:
    out = []
    for z in m.reshape(-1):
        out.extend((z.real, z.imag))
    return out


def _state_columns(m: np.ndarray) -> list[float]:
    tr = float(np.trace(m).real)
    pur = float(np.real(np.vdot(m.conj().T, m)))
    cols = [tr, pur]
    if m.shape[0] == 2:
        cols.extend(bloch_vector(m))
    return cols


def _summary_header(d: int) -> list[str]:
    head = ["trace_re", "purity"]
    if d == 2:
        head += ["bloch_x", "bloch_y", "bloch_z"]
    return head


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) for v in row] for row in r]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def write_reference_csv(path, ref: ReferenceSolution) -> Path:
    d = ref.states.shape[1]
    header = ["t", *entry_columns(d), *_summary_header(d)]
    rows = ([t, *_entries(m), *_state_columns(m)] for t, m in zip(ref.times, ref.states))
    return write_csv(path, header, rows)


def write_trajectory_csv(path, rec: TrajectoryRecord, entries: bool = True) -> Path:
    d = rec.states.shape[1]
    header = ["k", "t", *_summary_header(d)] + (entry_columns(d) if entries else [])
    rows = ([k, t, *_state_columns(m), *(_entries(m) if entries else [])]
            for k, t, m in zip(rec.steps, rec.times, rec.states))
    return write_csv(path, header, rows)


def states_from_csv(header: list[str], data: np.ndarray) -> np.ndarray:
    """Rebuild the matrix series from the m_xy_re / m_xy_im columns."""
    cols = [c for c in header if c.startswith("m_")]
    d = int(round(math.sqrt(len(cols) // 2)))
    idx = [header.index(c) for c in entry_columns(d)]
    vals = data[:, idx]
    return (vals[:, 0::2] + 1j * vals[:, 1::2]).reshape(-1, d, d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, payload: dict, timestamp: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = dict(_jsonable(payload))
    if timestamp:
        data["written_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path
