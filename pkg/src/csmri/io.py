"""Binary interchange formats and PNG export.

All formats are little-endian with an 8-byte magic and u32 height/width:

    CSIM-V1\\0 / CSKS-V1\\0   complex image / k-space grid,
                             float32 (re, im) pairs row-major
    CSMK-V1\\0               sampling mask, one byte per point in {0, 1}

PNGs are derived views only; the binaries are the source of truth.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC_IMAGE = b"CSIM-V1\x00"
MAGIC_KSPACE = b"CSKS-V1\x00"
MAGIC_MASK = b"CSMK-V1\x00"

_MAGICS = {"image": MAGIC_IMAGE, "kspace": MAGIC_KSPACE}


class FormatError(ValueError):
    """Malformed file; the message carries the byte offset."""


def _read_header(data: bytes, expected: dict[bytes, str], path) -> tuple[str, int, int]:
    if len(data) < 16:
        raise FormatError(f"{path}: truncated header, {len(data)} bytes at offset 0")
    magic = data[:8]
    if magic not in expected:
        names = b" or ".join(expected)
        raise FormatError(
            f"{path}: bad magic {magic!r} at byte 0 (expected {names!r})")
    h, w = struct.unpack_from("<II", data, 8)
    if h == 0 or w == 0:
        raise FormatError(f"{path}: zero dimension in header at byte 8")
    return expected[magic], h, w


def save_complex(path, data: np.ndarray, domain: str = "image") -> None:
    """Write a complex grid; domain is 'image' or 'kspace'."""
    if domain not in _MAGICS:
        raise ValueError(f"domain must be 'image' or 'kspace', got {domain!r}")
    arr = np.asarray(data, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D array, got shape {arr.shape}")
    h, w = arr.shape
    inter = np.empty((h, w, 2), dtype="<f4")
    inter[..., 0] = arr.real
    inter[..., 1] = arr.imag
    with open(path, "wb") as f:
        f.write(_MAGICS[domain])
        f.write(struct.pack("<II", h, w))
        f.write(inter.tobytes())


def load_complex(path, domain: str | None = None) -> np.ndarray:
    """Read a complex grid; if domain is given the magic must match."""
    data = Path(path).read_bytes()
    expected = {_MAGICS[domain]: domain} if domain else \
        {MAGIC_IMAGE: "image", MAGIC_KSPACE: "kspace"}
    _, h, w = _read_header(data, expected, path)
    need = h * w * 8
    payload = data[16:]
    if len(payload) != need:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes at offset 16, "
            f"expected {need} for {h}x{w}")
    inter = np.frombuffer(payload, dtype="<f4").reshape(h, w, 2)
    return (inter[..., 0].astype(np.float64)
            + 1j * inter[..., 1].astype(np.float64))


def save_mask(path, sampled: np.ndarray) -> None:
    arr = np.asarray(sampled, dtype=bool)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D mask, got shape {arr.shape}")
    with open(path, "wb") as f:
        f.write(MAGIC_MASK)
        f.write(struct.pack("<II", *arr.shape))
        f.write(arr.astype(np.uint8).tobytes())


def load_mask(path) -> np.ndarray:
    data = Path(path).read_bytes()
    _, h, w = _read_header(data, {MAGIC_MASK: "mask"}, path)
    payload = data[16:]
    if len(payload) != h * w:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes at offset 16, "
            f"expected {h * w} for {h}x{w}")
    raw = np.frombuffer(payload, dtype=np.uint8)
    bad = np.flatnonzero(raw > 1)
    if bad.size:
        raise FormatError(
            f"{path}: mask byte {raw[bad[0]]} at offset {16 + int(bad[0])} "
            "is not 0/1")
    return raw.reshape(h, w).astype(bool)


def write_gray_png(path, values: np.ndarray) -> None:
    """Write a float array as an 8-bit grayscale PNG (values clipped to
    [0, 1])."""
    arr = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    pix = (arr * 255.0 + 0.5).astype(np.uint8)
    h, w = pix.shape

    def chunk(tag: bytes, body: bytes) -> bytes:
        return (struct.pack(">I", len(body)) + tag + body
                + struct.pack(">I", zlib.crc32(tag + body) & 0xFFFFFFFF))

    raw = b"".join(b"\x00" + pix[i].tobytes() for i in range(h))
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    with open(path, "wb") as f:
        f.write(b"\x89PNG\r\n\x1a\n")
        f.write(chunk(b"IHDR", ihdr))
        f.write(chunk(b"IDAT", zlib.compress(raw, 6)))
        f.write(chunk(b"IEND", b""))


def magnitude_png(path, data: np.ndarray, peak: float | None = None) -> None:
    """Save |data| scaled by its own max (or a given peak)."""
    mag = np.abs(np.asarray(data))
    top = float(mag.max()) if peak is None else float(peak)
    write_gray_png(path, mag / top if top > 0 else mag)
