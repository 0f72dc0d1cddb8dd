"""File formats: CHF1 binary snapshots, PGM grayscale export, energy CSV.

CHF1 is a one-line ASCII header followed by the raw payload:

    CHF1 <mx> <my> <L> <t>\\n

then mx*my little-endian float64 values in row-major (x-major) order.  The
header floats are written with ``repr`` so the round trip is exact and the
bytes are platform-independent; rewriting the same field must produce an
identical file.
"""

from __future__ import annotations

import os
from typing import IO

import numpy as np

from .grid import Field, GridSpec

__all__ = [
    "SnapshotFormatError",
    "fmt17",
    "write_snapshot",
    "read_snapshot",
    "ENERGY_CSV_HEADER",
    "EnergyCsvWriter",
]

_MAGIC = "CHF1"


class SnapshotFormatError(ValueError):
    """Malformed snapshot header or truncated payload."""


def fmt17(x: float) -> str:
    """Float to text with 17 significant digits (round-trips in IEEE double)."""
    return f"{x:.17g}"


def write_snapshot(field: Field, path: str | os.PathLike, t: float, format: str = "chf") -> None:
    """Write a field as a CHF1 snapshot or an 8-bit PGM image."""
    if format == "chf":
        _write_chf(field, path, t)
    elif format == "pgm":
        _write_pgm(field, path)
    else:
        raise ValueError(f"unknown snapshot format {format!r}")


def _write_chf(field: Field, path: str | os.PathLike, t: float) -> None:
    if field.grid.dim != 2:
        raise ValueError("snapshots are written for 2-D fields")
    mx, my = field.values.shape
    header = f"{_MAGIC} {mx} {my} {field.grid.L!r} {t!r}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def _read_header_line(fh: IO[bytes]) -> str:
    raw = bytearray()
    while True:
        b = fh.read(1)
        if not b:
            raise SnapshotFormatError("unexpected end of file in header")
        if b == b"\n":
            break
        raw += b
        if len(raw) > 256:
            raise SnapshotFormatError("header line too long")
    return raw.decode("ascii")


def read_snapshot(path: str | os.PathLike) -> tuple[Field, float]:
    """Read a CHF1 snapshot; returns the field and the time stored with it."""
    with open(path, "rb") as fh:
        parts = _read_header_line(fh).split()
        if len(parts) != 5 or parts[0] != _MAGIC:
            raise SnapshotFormatError(f"not a {_MAGIC} snapshot: {path}")
        try:
            mx, my = int(parts[1]), int(parts[2])
            L, t = float(parts[3]), float(parts[4])
        except ValueError as exc:
            raise SnapshotFormatError(f"bad header fields in {path}: {parts[1:]}") from exc
        if mx != my:
            raise SnapshotFormatError(f"non-square snapshot {mx}x{my} not supported")
        payload = fh.read(mx * my * 8)
        if len(payload) != mx * my * 8:
            raise SnapshotFormatError(f"truncated payload in {path}")
        values = np.frombuffer(payload, dtype="<f8").reshape(mx, my)
    grid = GridSpec(L=L, m=mx)
    return Field(grid, values.copy()), t


def _write_pgm(field: Field, path: str | os.PathLike) -> None:
    """8-bit grayscale: phi in [-1, 1] mapped linearly to [0, 255], clamped.

    Image rows run top to bottom, so the y axis is flipped to keep y pointing
    up; x indexes columns.
    """
    clipped = np.clip(field.values, -1.0, 1.0)
    img = np.rint(255.0 * (clipped + 1.0) / 2.0).astype(np.uint8)
    img = img.T[::-1]
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


ENERGY_CSV_HEADER = "step,t,mass,E,E_mod,psd_iters,residual"


class EnergyCsvWriter:
    """Streams energy records to CSV, one flushed line per record.

    Flushing per row keeps the file usable for monitoring long runs and means
    an aborted run still leaves a valid prefix on disk.
    """

    def __init__(self, path: str | os.PathLike):
        self._fh = open(path, "w", encoding="ascii", newline="\n")
        self._fh.write(ENERGY_CSV_HEADER + "\n")
        self._fh.flush()

    def write(self, record) -> None:
        row = (
            f"{record.step},{fmt17(record.t)},{fmt17(record.mass)},"
            f"{fmt17(record.E)},{fmt17(record.E_mod)},"
            f"{record.psd_iters},{fmt17(record.residual)}"
        )
        self._fh.write(row + "\n")
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self) -> "EnergyCsvWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
