"""Versioned binary container for grid fields.

Layout (all little-endian): magic bytes ``HJMR``, version (u32, = 1),
d (u32), then n repeated d times (u32 each), then n^d IEEE-754 binary64
values, row-major.  Writing then reading is bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FieldIOError
from .torus import GridSpec, ScalarField

MAGIC = b"HJMR"
VERSION = 1


def write_field(path, field: ScalarField) -> None:
    path = Path(path)
    grid = field.grid
    header = struct.pack(f"<4sII{grid.d}I", MAGIC, VERSION, grid.d, *([grid.n] * grid.d))
    payload = field.values.astype("<f8", copy=False).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_field(path) -> ScalarField:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FieldIOError(f"cannot read field file {path}: {exc}") from exc
    if len(raw) < 12:
        raise FieldIOError(f"{path}: truncated header")
    magic, version, d = struct.unpack_from("<4sII", raw, 0)
    if magic != MAGIC:
        raise FieldIOError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FieldIOError(f"{path}: unsupported version {version}")
    if not 1 <= d <= 3:
        raise FieldIOError(f"{path}: unsupported dimension {d}")
    off = 12
    if len(raw) < off + 4 * d:
        raise FieldIOError(f"{path}: truncated grid header")
    ns = struct.unpack_from(f"<{d}I", raw, off)
    off += 4 * d
    if len(set(ns)) != 1:
        raise FieldIOError(f"{path}: anisotropic grids unsupported, got n = {ns}")
    n = ns[0]
    try:
        grid = GridSpec(d, n)
    except Exception as exc:
        raise FieldIOError(f"{path}: invalid grid: {exc}") from exc
    expected = grid.node_count * 8
    if len(raw) != off + expected:
        raise FieldIOError(
            f"{path}: payload has {len(raw) - off} bytes, expected {expected}"
        )
    values = np.frombuffer(raw, dtype="<f8", count=grid.node_count, offset=off)
    try:
        return ScalarField(grid, values.reshape(grid.shape))
    except Exception as exc:
        raise FieldIOError(f"{path}: invalid payload: {exc}") from exc
