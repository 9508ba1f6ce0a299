"""On-disk formats: BLDS bit-packed latents, binary PGM, BLD1 JSON checkpoints.

BLDS layout (little-endian): ``b"BLDS"``, u32 version, u32 D, u32 count,
then ``count`` rows of ``ceil(D / 8)`` bytes each, bits MSB-first, the last
byte of each row zero-padded.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

BLDS_MAGIC = b"BLDS"
BLDS_VERSION = 1
CHECKPOINT_FORMAT = "BLD1"


class FormatError(ValueError):
    pass


def pack_bits(bits) -> bytes:
    bits = np.asarray(bits)
    if bits.ndim != 2:
        raise FormatError("expected a (count, D) bit array")
    if np.any((bits != 0) & (bits != 1)):
        raise FormatError("latents must be strictly 0/1")
    count, D = bits.shape
    head = BLDS_MAGIC + struct.pack("<III", BLDS_VERSION, D, count)
    return head + np.packbits(bits.astype(np.uint8), axis=1, bitorder="big").tobytes()


def unpack_bits(raw: bytes) -> np.ndarray:
    if len(raw) < 16 or raw[:4] != BLDS_MAGIC:
        raise FormatError("not a BLDS file")
    version, D, count = struct.unpack("<III", raw[4:16])
    if version != BLDS_VERSION:
        raise FormatError(f"unsupported BLDS version {version}")
    row = (D + 7) // 8
    if len(raw) != 16 + row * count:
        raise FormatError(f"BLDS payload should be {row * count} bytes, got {len(raw) - 16}")
    packed = np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(count, row)
    return np.unpackbits(packed, axis=1, count=D, bitorder="big")


def write_blds(path, bits) -> None:
    Path(path).write_bytes(pack_bits(bits))


def read_blds(path) -> np.ndarray:
    return unpack_bits(Path(path).read_bytes())


def tile(images, ncols: int | None = None, sep: int = 128) -> np.ndarray:
    """Arrange (N, h, w) images in a grid with 1-pixel separators; values 0..255."""
    images = np.asarray(images)
    if images.ndim != 3 or images.shape[0] == 0 or images.shape[1] == 0 or images.shape[2] == 0:
        raise FormatError("need a non-empty (N, h, w) image stack")
    n, h, w = images.shape
    ncols = ncols or int(np.ceil(np.sqrt(n)))
    nrows = int(np.ceil(n / ncols))
    grid = np.full((nrows * h + nrows - 1, ncols * w + ncols - 1), sep, dtype=np.uint8)
    px = to_bytes(images)
    for i in range(n):
        r, c = divmod(i, ncols)
        grid[r * (h + 1):r * (h + 1) + h, c * (w + 1):c * (w + 1) + w] = px[i]
    return grid


def to_bytes(img) -> np.ndarray:
    """Bits -> {0, 255}; reals in [0, 1] -> rounded 0..255; uint8 passes through."""
    img = np.asarray(img)
    if img.dtype == np.uint8 and img.max(initial=0) > 1:
        return img
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(image, path) -> None:
    img = np.asarray(image)
    if img.ndim != 2 or img.size == 0:
        raise FormatError("PGM needs a non-empty 2-d image")
    px = to_bytes(img)
    h, w = px.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + px.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5" or parts[2] != b"255":
        raise FormatError("only binary P5 maxval-255 PGM is supported")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def save_checkpoint(path, config: dict, params: dict, opt_state: dict | None, seed: int, step: int) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": config,
        "params": {k: np.asarray(v, dtype=np.float64).tolist() for k, v in params.items()},
        "optimizer": opt_state,
        "rng_seed": seed,
        "step": step,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_checkpoint(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
    doc["params"] = {k: np.asarray(v, dtype=np.float64) for k, v in doc["params"].items()}
    return doc
