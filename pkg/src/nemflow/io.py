"""Record CSV files and binary ``NEMQ1`` state snapshots.

Snapshot layout (little endian)::

    b"NEMQ1"
    int32 nx, ny, m
    float64 Lx, Ly, t
    int32 bc_mode tag (0 dirichlet, 1 free_slip, 2 periodic)
    float64 u[(nx+1)*ny], v[nx*(ny+1)], p[nx*ny]     row-major, index [i, j]
    float64 d[m][nx*ny]                             one block per component
    dirichlet only: float64 trace left[ny*m], right[ny*m], bottom[nx*m], top[nx*m]
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .flow import FlowState
from .grid import BC_MODES, BoundaryData, Grid, VelocityField
from .simulator import EnergyRecord, SimState

HEADER = EnergyRecord.columns()
MAGIC = b"NEMQ1"
_HEAD = struct.Struct("<3i3di")


class SchemaError(ValueError):
    """File contents do not follow the expected format."""


def write_records(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for r in records:
            w.writerow([format(x, ".17g") for x in r.values()])


def read_records(path) -> list[EnergyRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh)
        try:
            header = next(rows)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {','.join(HEADER)}") from None
        if tuple(header) != HEADER:
            raise SchemaError(f"{path}: header {','.join(header)!r} does not match {','.join(HEADER)!r}")
        out = []
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != len(HEADER):
                raise SchemaError(f"{path}:{lineno}: expected {len(HEADER)} fields, got {len(row)}")
            try:
                out.append(EnergyRecord(*(float(x) for x in row)))
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from None
    return out


def snapshot_write(state: SimState, path) -> None:
    g = state.flow.grid
    d = np.asarray(state.director, dtype="<f8")
    m = d.shape[-1]
    parts = [
        MAGIC,
        _HEAD.pack(g.nx, g.ny, m, g.Lx, g.Ly, float(state.t), BC_MODES.index(g.bc_mode)),
        np.ascontiguousarray(state.flow.v.u, dtype="<f8").tobytes(),
        np.ascontiguousarray(state.flow.v.v, dtype="<f8").tobytes(),
        np.ascontiguousarray(state.flow.p, dtype="<f8").tobytes(),
    ]
    for k in range(m):
        parts.append(np.ascontiguousarray(d[..., k]).tobytes())
    if g.bc_mode == "dirichlet":
        b = state.boundary
        if b is None:
            raise ValueError("dirichlet snapshots need the boundary trace on the state")
        for a in (b.left, b.right, b.bottom, b.top):
            parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def snapshot_read(path) -> SimState:
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise SchemaError(f"{path}: not a NEMQ1 snapshot (bad magic/version)")
    off = len(MAGIC)
    if len(data) < off + _HEAD.size:
        raise SchemaError(f"{path}: truncated header")
    nx, ny, m, Lx, Ly, t, tag = _HEAD.unpack_from(data, off)
    off += _HEAD.size
    if not 0 <= tag < len(BC_MODES) or m < 1 or nx < 1 or ny < 1:
        raise SchemaError(f"{path}: corrupt header")
    grid = Grid(nx, ny, Lx, Ly, BC_MODES[tag])
    sizes = [(nx + 1) * ny, nx * (ny + 1), nx * ny] + [nx * ny] * m
    if grid.bc_mode == "dirichlet":
        sizes += [ny * m, ny * m, nx * m, nx * m]
    expected = off + 8 * sum(sizes)
    if len(data) != expected:
        raise SchemaError(f"{path}: size mismatch, header implies {expected} bytes, file has {len(data)}")
    flat = np.frombuffer(data, dtype="<f8", offset=off).astype(float)
    chunks = np.split(flat, np.cumsum(sizes)[:-1])
    u = chunks[0].reshape(nx + 1, ny)
    v = chunks[1].reshape(nx, ny + 1)
    p = chunks[2].reshape(nx, ny)
    d = np.stack([c.reshape(nx, ny) for c in chunks[3 : 3 + m]], axis=-1)
    boundary = None
    if grid.bc_mode == "dirichlet":
        left, right, bottom, top = chunks[3 + m :]
        boundary = BoundaryData(left.reshape(ny, m), right.reshape(ny, m), bottom.reshape(nx, m), top.reshape(nx, m))
    return SimState(t, FlowState(VelocityField(u, v, grid), p), d, boundary)
