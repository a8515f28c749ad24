"""Binary persistence and plot export.

Field files ("SWF1") hold one scalar field on its grid; trace files ("SWT1")
hold a boundary time series together with the grid, time metadata and the
boundary cell index list.  All integers and floats are little-endian; the
payload is row-major float64 and round-trips bit-exactly.  Writes go through
a temporary file and an atomic rename.

Plots are binary PGM (P5) with linear min-max scaling recorded in a sidecar
text file; traces export to CSV.
"""

from __future__ import annotations

import csv
import os
import tempfile

import numpy as np

from .forward import BoundaryTrace
from .grid import GridSpec, ball_mask, boundary_cells

__all__ = [
    "FileFormatError",
    "MagicError",
    "TruncatedPayloadError",
    "ExtentMismatchError",
    "write_field",
    "read_field",
    "write_trace",
    "read_trace",
    "write_pgm",
    "write_csv",
]

FIELD_MAGIC = b"SWF1"
TRACE_MAGIC = b"SWT1"


class FileFormatError(RuntimeError):
    pass


class MagicError(FileFormatError):
    pass


class TruncatedPayloadError(FileFormatError):
    pass


class ExtentMismatchError(FileFormatError):
    pass


def _atomic_write(path: str, payload: bytes):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".swtmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, buf: bytes, path: str):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, nbytes: int, what: str) -> bytes:
        if self.pos + nbytes > len(self.buf):
            raise TruncatedPayloadError(
                f"{self.path}: truncated while reading {what} "
                f"(need {nbytes} bytes at offset {self.pos})"
            )
        out = self.buf[self.pos : self.pos + nbytes]
        self.pos += nbytes
        return out

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count, what), dtype=dt)

    def done(self, what: str):
        if self.pos != len(self.buf):
            raise ExtentMismatchError(
                f"{self.path}: {len(self.buf) - self.pos} trailing bytes after {what}"
            )


def _grid_header(grid: GridSpec) -> bytes:
    parts = [
        np.asarray([grid.n], dtype="<u4").tobytes(),
        np.asarray(grid.shape, dtype="<u4").tobytes(),
        np.asarray([grid.h], dtype="<f8").tobytes(),
        np.asarray(grid.origin, dtype="<f8").tobytes(),
    ]
    return b"".join(parts)


def _read_grid(r: _Reader) -> GridSpec:
    n = int(r.array("<u4", 1, "dimension")[0])
    if n not in (2, 3):
        raise ExtentMismatchError(f"{r.path}: unsupported dimension {n}")
    extents = r.array("<u4", n, "extents").astype(int)
    if len(set(extents.tolist())) != 1:
        raise ExtentMismatchError(f"{r.path}: anisotropic extents {extents}")
    h = float(r.array("<f8", 1, "spacing")[0])
    origin = r.array("<f8", n, "origin")
    nx = int(extents[0])
    L = -float(origin[0])
    grid = GridSpec(n=n, nx=nx, h=h, box_half_width=L)
    if abs(2.0 * L / (nx - 1) - h) > 1e-12 * max(h, 1.0):
        raise ExtentMismatchError(f"{r.path}: spacing inconsistent with extents")
    return grid


def write_field(path: str, values: np.ndarray, grid: GridSpec):
    if values.shape != grid.shape:
        raise ExtentMismatchError("field shape does not match grid")
    payload = FIELD_MAGIC + _grid_header(grid) + np.ascontiguousarray(
        values, dtype="<f8"
    ).tobytes()
    _atomic_write(path, payload)


def read_field(path: str) -> tuple[np.ndarray, GridSpec]:
    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf, path)
    if r.take(4, "magic") != FIELD_MAGIC:
        raise MagicError(f"{path}: not a field file (bad magic)")
    grid = _read_grid(r)
    count = int(np.prod(grid.shape))
    values = r.array("<f8", count, "payload").reshape(grid.shape).copy()
    r.done("payload")
    return values, grid


def write_trace(path: str, trace: BoundaryTrace):
    grid = trace.grid
    parts = [
        TRACE_MAGIC,
        _grid_header(grid),
        np.asarray([1 if trace.closed else 0], dtype="<u4").tobytes(),
        np.asarray([trace.t0, trace.dt], dtype="<f8").tobytes(),
        np.asarray([trace.nt, trace.cells.ncells], dtype="<u8").tobytes(),
        np.ascontiguousarray(trace.cells.cells, dtype="<i8").tobytes(),
        np.ascontiguousarray(trace.values, dtype="<f8").tobytes(),
    ]
    _atomic_write(path, b"".join(parts))


def read_trace(path: str) -> BoundaryTrace:
    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf, path)
    if r.take(4, "magic") != TRACE_MAGIC:
        raise MagicError(f"{path}: not a trace file (bad magic)")
    grid = _read_grid(r)
    closed = bool(r.array("<u4", 1, "flags")[0] & 1)
    t0, dt = (float(v) for v in r.array("<f8", 2, "time metadata"))
    nt, ncells = (int(v) for v in r.array("<u8", 2, "counts"))
    cells_idx = r.array("<i8", ncells * grid.n, "cell indices").reshape(ncells, grid.n)
    values = r.array("<f8", nt * ncells, "payload").reshape(nt, ncells).copy()
    r.done("payload")
    cells = boundary_cells(ball_mask(grid, 1.0))
    if cells.ncells != ncells or not np.array_equal(cells.cells, cells_idx):
        raise ExtentMismatchError(
            f"{path}: stored boundary cells do not match the unit-ball staircase"
        )
    return BoundaryTrace(
        values=values, t0=t0, dt=dt, cells=cells, grid=grid, closed=closed
    )


def write_pgm(path: str, values: np.ndarray, note: str = ""):
    """2D array to binary PGM with linear min-max scaling; sidecar records it."""
    if values.ndim == 3:
        values = values[:, :, values.shape[2] // 2]
    if values.ndim != 2:
        raise ValueError("PGM export needs a 2D (or 3D) array")
    vmin = float(values.min())
    vmax = float(values.max())
    span = vmax - vmin
    scaled = np.zeros(values.shape, dtype=np.uint8)
    if span > 0:
        scaled = np.clip((values - vmin) / span * 255.0, 0, 255).astype(np.uint8)
    header = f"P5\n{values.shape[1]} {values.shape[0]}\n255\n".encode()
    _atomic_write(path, header + scaled.tobytes())
    side = (
        f"min={vmin!r}\nmax={vmax!r}\nrows={values.shape[0]}\n"
        f"cols={values.shape[1]}\nscaling=linear min-max\n{note}\n"
    )
    _atomic_write(path + ".txt", side.encode())


def write_csv(path: str, header: list[str], rows: list):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".swtmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
