import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bld.formats import (
    FormatError,
    load_checkpoint,
    pack_bits,
    read_blds,
    read_pgm,
    save_checkpoint,
    tile,
    unpack_bits,
    write_blds,
    write_pgm,
)


def test_pgm_2x2(tmp_path):
    write_pgm(np.array([[1, 0], [0, 1]]), tmp_path / "a.pgm")
    raw = (tmp_path / "a.pgm").read_bytes()
    assert raw == b"P5\n2 2\n255\n" + bytes([0xFF, 0, 0, 0xFF])
    np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), [[255, 0], [0, 255]])


def test_pgm_rejects_empty(tmp_path):
    with pytest.raises(FormatError):
        write_pgm(np.zeros((0, 3)), tmp_path / "e.pgm")
    with pytest.raises(FormatError):
        tile(np.zeros((0, 8, 8)))


def test_tiling_4x4_of_8x8(tmp_path):
    grid = tile(np.ones((16, 8, 8), dtype=np.uint8), ncols=4)
    assert grid.shape == (35, 35)
    assert grid[8, 0] == 128 and grid[0, 8] == 128 and grid[0, 0] == 255
    write_pgm(grid, tmp_path / "g.pgm")
    assert read_pgm(tmp_path / "g.pgm").shape == (35, 35)


def test_blds_layout():
    bits = np.array([[1, 0, 1, 1, 0, 0, 1, 0, 1, 1], [0] * 9 + [1]])
    raw = pack_bits(bits)
    assert raw[:4] == b"BLDS"
    assert struct.unpack("<III", raw[4:16]) == (1, 10, 2)
    assert raw[16:] == bytes([0b10110010, 0b11000000, 0, 0b01000000])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(0, 20), st.integers(0, 2 ** 31))
def test_blds_round_trip(D, n, seed):
    bits = np.random.default_rng(seed).integers(0, 2, (n, D)).astype(np.uint8)
    np.testing.assert_array_equal(unpack_bits(pack_bits(bits)), bits)


def test_blds_file_and_errors(tmp_path):
    bits = np.eye(5, dtype=np.uint8)
    write_blds(tmp_path / "z.blds", bits)
    np.testing.assert_array_equal(read_blds(tmp_path / "z.blds"), bits)
    raw = pack_bits(bits)
    with pytest.raises(FormatError):
        unpack_bits(b"XXXX" + raw[4:])
    with pytest.raises(FormatError):
        unpack_bits(raw[:-1])
    with pytest.raises(FormatError):
        unpack_bits(raw[:4] + struct.pack("<I", 2) + raw[8:])
    with pytest.raises(FormatError):
        pack_bits(np.array([[0.5, 1.0]]))


def test_checkpoint_round_trip(tmp_path):
    params = {"w": np.arange(6.0).reshape(2, 3) / 7, "b": np.array([1e-300, -2.5])}
    save_checkpoint(tmp_path / "c.json", {"D": 3}, params, {"step": 2}, 7, 2)
    doc = load_checkpoint(tmp_path / "c.json")
    assert doc["format"] == "BLD1" and doc["rng_seed"] == 7 and doc["step"] == 2
    for k in params:
        np.testing.assert_array_equal(doc["params"][k], params[k])
    (tmp_path / "bad.json").write_text('{"format": "XYZ"}')
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "bad.json")
