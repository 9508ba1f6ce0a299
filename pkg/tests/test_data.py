import gzip
import os
import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from bld.data import (
    IDX_DTYPES,
    CodewordDistribution,
    IdxDtypeError,
    IdxMagicError,
    IdxTensor,
    IdxTrailingDataError,
    IdxTruncatedError,
    binarize,
    default_codewords,
    downscale,
    load_digits_bits,
    load_image_bits,
    make_codeword_dataset,
    make_shapes_dataset,
    mnist_to_8x8,
    parse_idx,
    read_idx,
    serialize_idx,
)


def test_idx_images_example():
    raw = bytes([0, 0, 8, 3]) + struct.pack(">3I", 2, 3, 4) + bytes(range(24))
    t = parse_idx(raw)
    assert t.rank == 3 and t.dims == (2, 3, 4) and t.data.shape == (2, 3, 4)
    assert t.data[1, 2, 3] == 23


def test_idx_labels_example():
    raw = bytes([0, 0, 8, 1]) + struct.pack(">I", 5) + bytes([0, 1, 2, 3, 9])
    t = parse_idx(raw)
    np.testing.assert_array_equal(t.data, [0, 1, 2, 3, 9])


def test_idx_big_endian_dims_and_values():
    raw = bytes([0, 0, 0x0B, 1]) + struct.pack(">I", 2) + struct.pack(">2h", -2, 300)
    np.testing.assert_array_equal(parse_idx(raw).data, [-2, 300])
    raw = bytes([0, 0, 8, 1]) + struct.pack(">I", 258) + bytes(258)
    assert parse_idx(raw).dims == (258,)


GOOD = bytes([0, 0, 8, 2]) + struct.pack(">2I", 2, 3) + bytes(6)


@pytest.mark.parametrize("raw,err", [
    (GOOD[:-1], IdxTruncatedError),
    (GOOD[:3], IdxTruncatedError),
    (GOOD[:9], IdxTruncatedError),
    (b"", IdxTruncatedError),
    (bytes([1]) + GOOD[1:], IdxMagicError),
    (bytes([0, 7]) + GOOD[2:], IdxMagicError),
    (bytes([0, 0, 8, 0]), IdxMagicError),
    (bytes([0, 0, 0x0A]) + GOOD[3:], IdxDtypeError),
    (bytes([0, 0, 0xFF]) + GOOD[3:], IdxDtypeError),
    (GOOD + b"\x00", IdxTrailingDataError),
])
def test_idx_fault_injection(raw, err):
    with pytest.raises(err):
        parse_idx(raw)


def test_truncation_message_names_lengths():
    with pytest.raises(IdxTruncatedError, match="expected 6 bytes, got 5"):
        parse_idx(GOOD[:-1])


@st.composite
def idx_tensors(draw):
    code = draw(st.sampled_from(sorted(IDX_DTYPES)))
    shape = draw(hnp.array_shapes(min_dims=1, max_dims=4, min_side=0, max_side=5))
    dt = IDX_DTYPES[code].newbyteorder("=")
    arr = draw(hnp.arrays(dt, shape, elements={"allow_nan": False} if dt.kind == "f" else None))
    return code, arr


@settings(max_examples=100, deadline=None)
@given(idx_tensors())
def test_idx_round_trip(case):
    code, arr = case
    raw = serialize_idx(arr, code)
    t = parse_idx(raw)
    assert t.dtype_code == code and t.dims == arr.shape
    np.testing.assert_array_equal(t.data, arr)
    assert serialize_idx(t) == raw


def test_read_idx_raw_and_gzip(tmp_path):
    arr = np.arange(12, dtype=np.uint8).reshape(3, 4)
    raw = serialize_idx(arr)
    (tmp_path / "a.idx").write_bytes(raw)
    with gzip.open(tmp_path / "a.idx.gz", "wb") as fh:
        fh.write(raw)
    np.testing.assert_array_equal(read_idx(tmp_path / "a.idx").data, arr)
    np.testing.assert_array_equal(read_idx(tmp_path / "a.idx.gz").data, arr)


def test_serialize_rejects_unknown_dtype():
    with pytest.raises(IdxDtypeError):
        serialize_idx(IdxTensor(0x0A, (1,), np.zeros(1)))


def test_binarize_examples():
    assert np.all(binarize(np.zeros((2, 3, 3), dtype=np.uint8)) == 0)
    np.testing.assert_array_equal(binarize(np.array([[[127, 128]]], dtype=np.uint8)), [[0, 1]])
    assert binarize(np.zeros((4, 28, 28), dtype=np.uint8)).shape == (4, 784)


def test_binarize_idempotent_on_binary_images():
    rng = np.random.default_rng(0)
    b = binarize(rng.integers(0, 256, (5, 6, 6)).astype(np.uint8))
    np.testing.assert_array_equal(binarize((b * 255).astype(np.uint8)), b)


def test_downscale_examples():
    rng = np.random.default_rng(0)
    x = rng.integers(0, 2, (3, 6, 6))
    np.testing.assert_array_equal(downscale(x, 1), x)
    np.testing.assert_array_equal(downscale(np.ones((2, 6, 6)), 3), 1)
    np.testing.assert_array_equal(downscale(np.zeros((2, 6, 6)), 3), 0)
    checker = (np.add.outer(np.arange(8), np.arange(8)) % 2)[None]
    np.testing.assert_array_equal(downscale(checker, 2), 1)
    with pytest.raises(ValueError):
        downscale(x, 0)


def test_mnist_to_8x8_crops_edges():
    img = np.zeros((1, 28, 28), dtype=np.uint8)
    img[0, :2, :] = 255  # entirely inside the 2-pixel crop margin
    img[0, 2:5, 2:5] = 255  # exactly the first 3x3 block
    out = mnist_to_8x8(img)
    assert out.shape == (1, 64)
    assert out[0, 0] == 1 and out[0].sum() == 1


def test_codeword_distribution_invariants():
    with pytest.raises(ValueError):
        CodewordDistribution([[0, 1], [1, 0]], [1.0, 0.0])
    with pytest.raises(ValueError):
        CodewordDistribution([[0, 1], [0, 1]], [0.5, 0.5])
    with pytest.raises(ValueError):
        CodewordDistribution([[0, 1], [1, 0]], [0.6, 0.5])
    with pytest.raises(ValueError):
        CodewordDistribution(np.zeros((1, 17)), [1.0])
    d = default_codewords()
    assert d.d == 8 and d.table().sum() == pytest.approx(1.0)
    assert len({tuple(w[:4]) for w in d.codewords}) == 4


def test_codeword_dataset_examples():
    single = CodewordDistribution.from_strings(["0110"])
    x = make_codeword_dataset(single, 20, np.random.default_rng(0))
    assert np.all(x == [0, 1, 1, 0])
    d = default_codewords()
    bits, idx = make_codeword_dataset(d, 10_000, np.random.default_rng(1), return_labels=True)
    freq = np.bincount(idx, minlength=4) / 10_000
    assert np.all((freq >= 0.23) & (freq <= 0.27))
    np.testing.assert_array_equal(bits, d.codewords[idx])
    again = make_codeword_dataset(d, 10_000, np.random.default_rng(1))
    np.testing.assert_array_equal(bits, again)
    assert d.outside_mass(bits) == 0.0


def test_digits_and_shapes():
    x, y = load_digits_bits()
    assert x.shape == (1797, 64) and set(np.unique(x)) == {0, 1}
    assert len(y) == 1797
    s = make_shapes_dataset(50, np.random.default_rng(0))
    assert s.shape == (50, 64) and np.all(s.sum(1) > 0)
    assert load_image_bits("shapes", n_shapes=10).shape == (10, 64)


def test_load_image_bits_from_idx(tmp_path):
    imgs = np.zeros((3, 28, 28), dtype=np.uint8)
    (tmp_path / "m.idx").write_bytes(serialize_idx(imgs))
    assert load_image_bits(str(tmp_path / "m.idx")).shape == (3, 64)


MNIST_DIR = os.environ.get("BLD_MNIST_DIR")


@pytest.mark.skipif(not MNIST_DIR, reason="set BLD_MNIST_DIR to a folder with train-images-idx3-ubyte[.gz]")
def test_mnist_density():
    d = Path(MNIST_DIR)
    path = next(p for p in (d / "train-images-idx3-ubyte.gz", d / "train-images-idx3-ubyte") if p.exists())
    t = read_idx(path)
    assert t.dims == (60000, 28, 28)
    assert 0.10 <= binarize(t.data).mean() <= 0.20
