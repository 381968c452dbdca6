"""Matrix file formats: DMAT1 binary and headerless CSV.

DMAT1 layout (all integers little-endian):

    bytes 0..5    magic b"DMAT1\\0"
    bytes 6..13   rows, unsigned 64-bit
    bytes 14..21  cols, unsigned 64-bit
    then          rows*cols float64 values, little-endian, row-major

CSV files are headerless comma-separated doubles, one matrix row per line,
written with enough digits to round-trip float64 exactly.

pack_dmat/unpack_dmat work on in-memory buffers so the same block format can
be embedded inside larger containers (the index file format does this).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .linalg import as_matrix

DMAT_MAGIC = b"DMAT1\x00"
_HEADER = struct.Struct("<QQ")


def pack_dmat(a) -> bytes:
    """Serialize a matrix to a DMAT1 block."""
    a = as_matrix(a)
    body = np.ascontiguousarray(a, dtype="<f8").tobytes()
    return DMAT_MAGIC + _HEADER.pack(a.shape[0], a.shape[1]) + body


def unpack_dmat(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Read one DMAT1 block from ``buf`` starting at ``offset``.

    Returns the matrix and the offset just past the block.  Raises
    FormatError on bad magic, truncation, or non-finite payload values.
    """
    head_end = offset + len(DMAT_MAGIC) + _HEADER.size
    if len(buf) < head_end:
        raise FormatError("truncated DMAT1 block: header incomplete")
    if buf[offset : offset + len(DMAT_MAGIC)] != DMAT_MAGIC:
        raise FormatError("bad DMAT1 magic")
    rows, cols = _HEADER.unpack_from(buf, offset + len(DMAT_MAGIC))
    if rows == 0 or cols == 0:
        raise FormatError(f"DMAT1 block declares empty shape {rows}x{cols}")
    end = head_end + rows * cols * 8
    if len(buf) < end:
        raise FormatError(
            f"truncated DMAT1 block: need {end - offset} bytes, "
            f"have {len(buf) - offset}"
        )
    flat = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=head_end)
    a = flat.reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(a)):
        raise FormatError("DMAT1 payload contains non-finite values")
    return np.ascontiguousarray(a), end


def save_dmat(path, a) -> None:
    Path(path).write_bytes(pack_dmat(a))


def load_dmat(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    a, end = unpack_dmat(buf)
    if end != len(buf):
        raise FormatError(f"{end} byte DMAT1 file has {len(buf) - end} trailing bytes")
    return a


def save_csv_matrix(path, a) -> None:
    """Write a headerless CSV of doubles (%.17g round-trips float64)."""
    np.savetxt(path, as_matrix(a), delimiter=",", fmt="%.17g")


def load_csv_matrix(path) -> np.ndarray:
    try:
        a = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"not a numeric CSV matrix: {exc}") from exc
    return as_matrix(a, name=str(path))


def load_matrix_auto(path) -> np.ndarray:
    """Dispatch on file suffix: .dmat -> DMAT1, anything else -> CSV."""
    if str(path).endswith(".dmat"):
        return load_dmat(path)
    return load_csv_matrix(path)


# ---------------------------------------------------------------------------
# CRC-64 (the XZ variant: reflected polynomial 0xC96C5795D7870F42, initial
# value and final xor both all-ones).  The stdlib has no 64-bit CRC, and a
# dependency for one checksum is not worth it.  Slicing-by-8 keeps the pure
# Python loop at one step per 8 input bytes, which is fast enough for the
# multi-megabyte index files this guards.

_CRC64_POLY = 0xC96C5795D7870F42
_CRC64_MASK = 0xFFFFFFFFFFFFFFFF


def _crc64_tables() -> list[list[int]]:
    t0 = []
    for byte in range(256):
        c = byte
        for _ in range(8):
            c = (c >> 1) ^ _CRC64_POLY if c & 1 else c >> 1
        t0.append(c)
    tables = [t0]
    for k in range(1, 8):
        prev = tables[k - 1]
        tables.append([(prev[b] >> 8) ^ t0[prev[b] & 0xFF] for b in range(256)])
    return tables


_CRC64_TABLES = _crc64_tables()


def crc64(data: bytes) -> int:
    """CRC-64/XZ of ``data`` as an unsigned 64-bit integer."""
    t0, t1, t2, t3, t4, t5, t6, t7 = _CRC64_TABLES
    crc = _CRC64_MASK
    n_words = len(data) // 8
    if n_words:
        words = np.frombuffer(data, dtype="<u8", count=n_words).tolist()
        for w in words:
            crc ^= w
            crc = (
                t7[crc & 0xFF]
                ^ t6[(crc >> 8) & 0xFF]
                ^ t5[(crc >> 16) & 0xFF]
                ^ t4[(crc >> 24) & 0xFF]
                ^ t3[(crc >> 32) & 0xFF]
                ^ t2[(crc >> 40) & 0xFF]
                ^ t1[(crc >> 48) & 0xFF]
                ^ t0[crc >> 56]
            )
    for byte in data[n_words * 8 :]:
        crc = (crc >> 8) ^ t0[(crc ^ byte) & 0xFF]
    return crc ^ _CRC64_MASK
