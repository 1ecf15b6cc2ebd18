"""Binary field snapshots, trajectory directories, manifests and CSV output.

Snapshot layout (little-endian): 32-byte header ``"NLSF"``, version u16,
dim u16, N u32, space u8, zero padding; then L as f64; then N^d interleaved
(re, im) f64 pairs in row-major order.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .functionals import DiagnosticsRecord, Trajectory
from .spectral import Field, Grid, Space

MAGIC = b"NLSF"
VERSION = 1
_HEADER = struct.Struct("<4sHHIB19x")
_SPACE_CODE = {Space.PHYSICAL: 0, Space.SPECTRAL: 1}
_CODE_SPACE = {v: k for k, v in _SPACE_CODE.items()}

TRAJECTORY_MANIFEST = "trajectory.json"


class SnapshotError(ValueError):
    pass


def encode_snapshot(u: Field) -> bytes:
    g = u.grid
    head = _HEADER.pack(MAGIC, VERSION, g.dim, g.points_per_axis, _SPACE_CODE[u.space])
    body = np.ascontiguousarray(u.values, dtype="<c16").tobytes()
    return head + struct.pack("<d", g.box_length) + body


def decode_snapshot(data: bytes) -> Field:
    if len(data) < _HEADER.size + 8:
        raise SnapshotError("snapshot too short for header")
    magic, version, dim, n, space = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    (L,) = struct.unpack_from("<d", data, _HEADER.size)
    grid = Grid(dim, n, L)
    off = _HEADER.size + 8
    expected = grid.size * 16
    if len(data) - off != expected:
        raise SnapshotError(f"expected {expected} payload bytes, got {len(data) - off}")
    vals = np.frombuffer(data, dtype="<c16", offset=off).astype(np.complex128).reshape(grid.shape)
    return Field(grid, vals, _CODE_SPACE[space])


def write_snapshot(path: str | os.PathLike, u: Field) -> None:
    atomic_write_bytes(Path(path), encode_snapshot(u))


def read_snapshot(path: str | os.PathLike) -> Field:
    return decode_snapshot(Path(path).read_bytes())


def atomic_write_bytes(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def grid_dict(g: Grid) -> dict:
    return {"dim": g.dim, "points_per_axis": g.points_per_axis, "box_length": g.box_length}


def save_trajectory(
    directory: str | os.PathLike,
    slices: Iterable[Field],
    times: Iterable[float],
    dt: float,
    extra: dict | None = None,
) -> list[str]:
    """Write snapshots plus ``trajectory.json``; returns the written file names."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    grid = None
    for i, (u, t) in enumerate(zip(slices, times)):
        grid = u.grid
        name = f"snap_{i:06d}.nlsf"
        write_snapshot(d / name, u)
        entries.append({"file": name, "t": float(t)})
    if grid is None:
        raise ValueError("no slices to save")
    manifest = {
        "t0": entries[0]["t"],
        "dt": float(dt),
        "count": len(entries),
        "grid": grid_dict(grid),
        "snapshots": entries,
    }
    if extra:
        manifest.update(extra)
    atomic_write_text(d / TRAJECTORY_MANIFEST, json.dumps(manifest, indent=2))
    return [e["file"] for e in entries] + [TRAJECTORY_MANIFEST]


def load_manifest(directory: str | os.PathLike) -> dict:
    return json.loads((Path(directory) / TRAJECTORY_MANIFEST).read_text())


def load_trajectory(directory: str | os.PathLike) -> Trajectory:
    d = Path(directory)
    man = load_manifest(d)
    slices = [read_snapshot(d / e["file"]) for e in man["snapshots"]]
    return Trajectory(slices[0].grid, man["t0"], man["dt"], slices)


def diagnostics_csv(records: Iterable[DiagnosticsRecord]) -> str:
    lines = [DiagnosticsRecord.CSV_HEADER]
    lines.extend(r.csv_row() for r in records)
    return "\n".join(lines) + "\n"
