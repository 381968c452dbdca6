"""Matrix file formats and the checksum they share."""

import numpy as np
import pytest

from l1sq.errors import FormatError
from l1sq.matio import (
    crc64,
    load_csv_matrix,
    load_dmat,
    load_matrix_auto,
    pack_dmat,
    save_csv_matrix,
    save_dmat,
    unpack_dmat,
)


def crc64_bitwise(data: bytes) -> int:
    """Oracle: CRC-64/XZ one bit at a time, straight from the definition."""
    poly = 0xC96C5795D7870F42
    crc = 0xFFFFFFFFFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ poly if crc & 1 else crc >> 1
    return crc ^ 0xFFFFFFFFFFFFFFFF


def test_crc64_matches_bitwise_oracle():
    rng = np.random.default_rng(21)
    for size in (0, 1, 7, 8, 9, 64, 1000, 4097):
        data = rng.integers(0, 256, size=size, dtype=np.uint8).tobytes()
        assert crc64(data) == crc64_bitwise(data), f"mismatch at size {size}"


def test_crc64_known_vector():
    # the standard check value for CRC-64/XZ
    assert crc64(b"123456789") == 0x995DC9BBDF1939FA


def test_dmat_round_trip_is_bit_identical(tmp_path):
    rng = np.random.default_rng(2)
    a = rng.standard_normal((13, 7))
    a[0, 0] = -0.0  # sign of zero must survive too
    path = tmp_path / "m.dmat"
    save_dmat(path, a)
    b = load_dmat(path)
    assert a.shape == b.shape
    assert np.array_equal(a.view(np.uint64), b.view(np.uint64))


def test_pack_unpack_offset():
    a = np.arange(6.0).reshape(2, 3)
    blob = b"xx" + pack_dmat(a)
    out, end = unpack_dmat(blob, offset=2)
    assert np.array_equal(out, a)
    assert end == len(blob)


def test_dmat_magic_and_truncation(tmp_path):
    a = np.ones((3, 2))
    path = tmp_path / "m.dmat"
    save_dmat(path, a)
    raw = path.read_bytes()

    bad = tmp_path / "bad.dmat"
    bad.write_bytes(b"WRONG0" + raw[6:])
    with pytest.raises(FormatError):
        load_dmat(bad)

    trunc = tmp_path / "trunc.dmat"
    trunc.write_bytes(raw[:-9])
    with pytest.raises(FormatError):
        load_dmat(trunc)


def test_csv_matrix_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, 6)) * 10.0 ** rng.integers(-8, 8, size=(4, 6))
    path = tmp_path / "m.csv"
    save_csv_matrix(path, a)
    b = load_csv_matrix(path)
    assert np.array_equal(a, b), "csv round trip must be exact (repr doubles)"


def test_load_matrix_auto_dispatches(tmp_path):
    a = np.array([[1.5, -2.5]])
    save_dmat(tmp_path / "a.dmat", a)
    save_csv_matrix(tmp_path / "a.csv", a)
    assert np.array_equal(load_matrix_auto(tmp_path / "a.dmat"), a)
    assert np.array_equal(load_matrix_auto(tmp_path / "a.csv"), a)


def test_csv_ragged_rows_rejected(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(FormatError):
        load_csv_matrix(path)
