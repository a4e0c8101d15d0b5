"""Trace files: one CSV row per tick, bitwise-stable numbers.

Layout:

    # wavepursuit-trace 1
    # scenario corridor-drift
    # hash 0123abcd...
    # seed 7
    # dt 0.05
    # capture_radius 0.25
    # backend cython
    # rows 901
    t,px,py,ex,ey,dist,vx,vy,V,grad2,dVdt,clearance_p,clearance_e,captured
    0.0,2.8,4.8,...

The grad2 and dVdt columns carry the field samples at the point where each
tick's command was computed; those are the quantities the descent audit
grades, and reading a file sets both the command-point and post-move sample
arrays to them. Floats are written with repr, so write -> read -> write is
byte-identical and the golden regression files stay meaningful.

The declared row count makes truncation detectable even when a file is cut
exactly at a line boundary.
"""

from __future__ import annotations

import math

import numpy as np

from . import __version__
from .engine import GameTrace
from .errors import SchemaMismatch, ValidationError

__all__ = ["TRACE_FORMAT", "TRACE_MARKER", "write_trace", "read_trace",
           "format_trace", "parse_trace"]

TRACE_FORMAT = 1
TRACE_MARKER = "# wavepursuit-trace"

COLUMNS = ("t", "px", "py", "ex", "ey", "dist", "vx", "vy", "V", "grad2",
           "dVdt", "clearance_p", "clearance_e", "captured")

# metadata keys serialized in this order; missing ones are simply omitted
_META_KEYS = ("scenario", "hash", "seed", "dt", "capture_radius", "backend")
_META_NUMERIC = {"seed": int, "dt": float, "capture_radius": float}


def format_trace(trace: GameTrace) -> str:
    n = len(trace)
    numeric = np.column_stack([
        trace.t, trace.pursuer[:, 0], trace.pursuer[:, 1],
        trace.evader[:, 0], trace.evader[:, 1], trace.distance,
        trace.command[:, 0], trace.command[:, 1], trace.potential,
        trace.cmd_grad_sq, trace.cmd_dvdt, trace.clearance_p, trace.clearance_e,
    ])
    if not np.isfinite(numeric).all():
        raise ValidationError("trace contains non-finite values")

    lines = [f"{TRACE_MARKER} {TRACE_FORMAT}"]
    for key in _META_KEYS:
        if key in trace.metadata:
            lines.append(f"# {key} {trace.metadata[key]}")
    lines.append(f"# rows {n}")
    lines.append(",".join(COLUMNS))
    flags = trace.captured.astype(int)
    for k in range(n):
        row = [repr(float(x)) for x in numeric[k]]
        row.append(str(int(flags[k])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_trace(trace: GameTrace, path) -> None:
    text = format_trace(trace)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def read_trace(path) -> GameTrace:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh.read())


def parse_trace(text: str) -> GameTrace:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(TRACE_MARKER + " "):
        raise SchemaMismatch("missing trace format marker")
    try:
        fmt = int(lines[0].rsplit(" ", 1)[1])
    except ValueError:
        raise SchemaMismatch(f"bad format marker {lines[0]!r}")
    if fmt != TRACE_FORMAT:
        raise SchemaMismatch(f"unknown trace format {fmt}, this build reads {TRACE_FORMAT}")

    metadata: dict = {"version": __version__}
    declared_rows = None
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        if line.startswith("#"):
            parts = line[1:].strip().split(" ", 1)
            if len(parts) != 2:
                raise SchemaMismatch(f"bad metadata line {line!r}")
            key, value = parts
            try:
                if key == "rows":
                    declared_rows = int(value)
                else:
                    metadata[key] = _META_NUMERIC.get(key, str)(value)
            except ValueError:
                raise SchemaMismatch(f"bad metadata value in line {line!r}")
        else:
            body_start = i
            break
    if body_start is None or declared_rows is None:
        raise SchemaMismatch("header ended before the row count and column line")
    if lines[body_start] != ",".join(COLUMNS):
        raise SchemaMismatch(f"unexpected column line {lines[body_start]!r}")

    rows = [ln for ln in lines[body_start + 1:] if ln]
    if len(rows) != declared_rows:
        raise SchemaMismatch(
            f"declared {declared_rows} rows but found {len(rows)}; file truncated?")

    data = np.empty((declared_rows, 13))
    flags = np.empty(declared_rows, dtype=bool)
    for k, ln in enumerate(rows):
        parts = ln.split(",")
        if len(parts) != len(COLUMNS):
            raise SchemaMismatch(f"row {k} has {len(parts)} columns, expected {len(COLUMNS)}")
        try:
            vals = [float(p) for p in parts[:13]]
        except ValueError:
            raise SchemaMismatch(f"row {k} holds non-numeric data")
        if not all(math.isfinite(v) for v in vals):
            raise SchemaMismatch(f"row {k} holds non-finite data")
        data[k] = vals
        flags[k] = parts[13] == "1"

    grad2 = data[:, 9].copy()
    dvdt = data[:, 10].copy()
    return GameTrace(
        t=data[:, 0].copy(),
        pursuer=data[:, 1:3].copy(),
        evader=data[:, 3:5].copy(),
        distance=data[:, 5].copy(),
        command=data[:, 6:8].copy(),
        potential=data[:, 8].copy(),
        grad_sq=grad2.copy(),
        dvdt=dvdt.copy(),
        cmd_grad_sq=grad2,
        cmd_dvdt=dvdt,
        clearance_p=data[:, 11].copy(),
        clearance_e=data[:, 12].copy(),
        captured=flags,
        metadata=metadata,
    )
