"""Datasets: IDX files, binarisation, and synthetic binary distributions."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .oracle import encode_rows

# dtype code -> big-endian numpy dtype
IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


class IdxError(ValueError):
    pass


class IdxMagicError(IdxError):
    pass


class IdxDtypeError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


class IdxTrailingDataError(IdxError):
    pass


@dataclass
class IdxTensor:
    dtype_code: int
    dims: tuple[int, ...]
    data: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.dims)


def parse_idx(raw: bytes) -> IdxTensor:
    if len(raw) < 4:
        raise IdxTruncatedError(f"header needs 4 bytes, got {len(raw)}")
    if raw[0] != 0 or raw[1] != 0:
        raise IdxMagicError(f"magic must start with 00 00, got {raw[0]:02x} {raw[1]:02x}")
    code, rank = raw[2], raw[3]
    if code not in IDX_DTYPES:
        raise IdxDtypeError(f"unsupported dtype code 0x{code:02x}")
    if rank == 0:
        raise IdxMagicError("rank must be at least 1")
    header = 4 + 4 * rank
    if len(raw) < header:
        raise IdxTruncatedError(f"header needs {header} bytes, got {len(raw)}")
    dims = struct.unpack(f">{rank}I", raw[4:header])
    dt = IDX_DTYPES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
    actual = len(raw) - header
    if actual < expected:
        raise IdxTruncatedError(f"payload truncated: expected {expected} bytes, got {actual}")
    if actual > expected:
        raise IdxTrailingDataError(f"payload has {actual - expected} trailing bytes (expected {expected})")
    data = np.frombuffer(raw, dtype=dt, count=int(np.prod(dims)), offset=header).reshape(dims)
    return IdxTensor(dtype_code=code, dims=tuple(dims), data=data.astype(dt.newbyteorder("=")))


def serialize_idx(t: IdxTensor | np.ndarray, dtype_code: int | None = None) -> bytes:
    if isinstance(t, IdxTensor):
        arr, code = np.asarray(t.data), t.dtype_code
    else:
        arr = np.asarray(t)
        code = dtype_code if dtype_code is not None else 0x08
    if code not in IDX_DTYPES:
        raise IdxDtypeError(f"unsupported dtype code 0x{code:02x}")
    head = bytes([0, 0, code, arr.ndim]) + struct.pack(f">{arr.ndim}I", *arr.shape)
    return head + arr.astype(IDX_DTYPES[code]).tobytes()


def read_idx(path) -> IdxTensor:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return parse_idx(fh.read())


def binarize(images, threshold: int = 128) -> np.ndarray:
    """Threshold a batch of byte images (N, ...) into flattened bits."""
    images = np.asarray(images)
    bits = (images >= threshold).astype(np.uint8)
    return bits.reshape(bits.shape[0], -1)


def downscale(images, factor: int, out_shape: tuple[int, int] | None = None) -> np.ndarray:
    """Mean-pool binary images (N, h, w) in factor x factor blocks and re-threshold at 0.5.

    The input is centre-cropped to ``out_shape * factor`` first (default:
    the largest multiple of ``factor`` that fits).
    """
    images = np.asarray(images, dtype=np.float64)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    n, h, w = images.shape
    oh, ow = out_shape if out_shape is not None else (h // factor, w // factor)
    ch, cw = oh * factor, ow * factor
    if ch > h or cw > w or oh < 1 or ow < 1:
        raise ValueError(f"cannot take {oh}x{ow} blocks of {factor} from {h}x{w}")
    top, left = (h - ch) // 2, (w - cw) // 2
    crop = images[:, top:top + ch, left:left + cw]
    pooled = crop.reshape(n, oh, factor, ow, factor).mean(axis=(2, 4))
    return (pooled >= 0.5).astype(np.uint8)


def mnist_to_8x8(images) -> np.ndarray:
    """28x28 byte images -> (N, 64) bits: binarise, crop to 24x24, 3x3 pool."""
    images = np.asarray(images)
    bits = (images >= 128).astype(np.uint8)
    return downscale(bits, 3, (8, 8)).reshape(len(images), -1)


@dataclass
class CodewordDistribution:
    codewords: np.ndarray  # (m, d) bits
    probs: np.ndarray  # (m,)

    def __post_init__(self):
        self.codewords = np.asarray(self.codewords, dtype=np.uint8)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.codewords.ndim != 2 or self.codewords.shape[0] != self.probs.shape[0]:
            raise ValueError("need one probability per codeword")
        if self.d > 16:
            raise ValueError("codeword length must be <= 16")
        if np.any((self.codewords != 0) & (self.codewords != 1)):
            raise ValueError("codewords must be bits")
        if len(np.unique(encode_rows(self.codewords))) != len(self.codewords):
            raise ValueError("codewords must be distinct")
        if np.any(self.probs <= 0):
            raise ValueError("probabilities must be positive")
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")

    @property
    def d(self) -> int:
        return self.codewords.shape[1]

    @classmethod
    def uniform(cls, codewords) -> "CodewordDistribution":
        cw = np.asarray(codewords)
        return cls(cw, np.full(len(cw), 1.0 / len(cw)))

    @classmethod
    def from_strings(cls, words: list[str], probs=None) -> "CodewordDistribution":
        cw = np.array([[int(c) for c in w] for w in words], dtype=np.uint8)
        return cls.uniform(cw) if probs is None else cls(cw, probs)

    def table(self) -> np.ndarray:
        """Probability of every one of the 2**d outcomes, indexed by row code."""
        out = np.zeros(2 ** self.d)
        out[encode_rows(self.codewords)] = self.probs
        return out

    def outside_mass(self, samples) -> float:
        """Fraction of samples that are not codewords."""
        inside = np.isin(encode_rows(samples), encode_rows(self.codewords))
        return float(1.0 - inside.mean())


# four 8-bit words with distinct 4-bit prefixes
DEFAULT_CODEWORDS = ("10110010", "01101100", "11000111", "00011001")


def default_codewords() -> CodewordDistribution:
    return CodewordDistribution.from_strings(list(DEFAULT_CODEWORDS))


def make_codeword_dataset(dist: CodewordDistribution, n: int, rng: np.random.Generator,
                          return_labels: bool = False):
    idx = rng.choice(len(dist.probs), size=n, p=dist.probs)
    bits = dist.codewords[idx].copy()
    return (bits, idx) if return_labels else bits


def load_digits_bits(threshold: int = 8):
    """scikit-learn's bundled 8x8 digits (0..16 grey levels) as (N, 64) bits and labels."""
    from sklearn.datasets import load_digits

    d = load_digits()
    return (d.images >= threshold).astype(np.uint8).reshape(len(d.images), -1), d.target.astype(np.int64)


def make_shapes_dataset(n: int, rng: np.random.Generator, size: int = 8) -> np.ndarray:
    """Random filled rectangles, hollow rectangles and bars on a size x size grid, flattened."""
    out = np.zeros((n, size, size), dtype=np.uint8)
    for i in range(n):
        kind = rng.integers(3)
        if kind == 2:
            j = rng.integers(size)
            if rng.random() < 0.5:
                out[i, j, :] = 1
            else:
                out[i, :, j] = 1
            continue
        r0, c0 = rng.integers(0, size - 2, size=2)
        r1 = rng.integers(r0 + 2, size + 1)
        c1 = rng.integers(c0 + 2, size + 1)
        out[i, r0:r1, c0:c1] = 1
        if kind == 1 and r1 - r0 > 2 and c1 - c0 > 2:
            out[i, r0 + 1:r1 - 1, c0 + 1:c1 - 1] = 0
    return out.reshape(n, -1)


def load_image_bits(source: str, rng: np.random.Generator | None = None, n_shapes: int = 2000):
    """Resolve a named image source to (N, 64) bits.

    ``digits`` uses scikit-learn's bundled set, falling back to ``shapes`` if
    scikit-learn is unavailable; any other value is an IDX image file.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if source == "digits":
        try:
            return load_digits_bits()[0]
        except ImportError:
            source = "shapes"
    if source == "shapes":
        return make_shapes_dataset(n_shapes, rng)
    t = read_idx(source)
    if t.rank != 3:
        raise IdxError(f"expected rank-3 image tensor, got rank {t.rank}")
    if t.dims[1:] == (28, 28):
        return mnist_to_8x8(t.data)
    return binarize(t.data)
