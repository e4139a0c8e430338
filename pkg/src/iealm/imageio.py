"""Binary PPM (P6) / PGM (P5) and a raw fallback format.

The raw format is an 8-byte header (magic ``IEAL``, big-endian u16 height
M, big-endian u16 width N) followed by row-major pixel bytes.  The channel
count (1 or 3) is implied by the payload length.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

RAW_MAGIC = b"IEAL"


class ImageFormatError(ValueError):
    pass


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    pos = 0
    while len(out) < count:
        if pos >= len(data):
            raise ImageFormatError("truncated header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace():
                pos += 1
            out.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return out, pos + 1


def decode_netpbm(data: bytes) -> np.ndarray:
    toks, offset = _tokens(data, 4)
    magic = toks[0]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"unsupported magic {magic!r}; only binary P5/P6 are read")
    try:
        width, height, maxval = (int(t) for t in toks[1:])
    except ValueError as exc:
        raise ImageFormatError(f"bad header field: {exc}") from None
    if maxval != 255:
        raise ImageFormatError(f"maxval {maxval} unsupported (need 255)")
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    raster = data[offset:offset + need]
    if len(raster) != need:
        raise ImageFormatError(f"expected {need} raster bytes, found {len(raster)}")
    arr = np.frombuffer(raster, dtype=np.uint8).copy()
    return arr.reshape(height, width, 3) if channels == 3 else arr.reshape(height, width)


def encode_netpbm(img: np.ndarray) -> bytes:
    img = np.asarray(img, dtype=np.uint8)
    if img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    elif img.ndim == 2:
        magic = b"P5"
    else:
        raise ImageFormatError(f"cannot encode image of shape {img.shape}")
    h, w = img.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def decode_raw(data: bytes) -> np.ndarray:
    if len(data) < 8 or data[:4] != RAW_MAGIC:
        raise ImageFormatError("missing IEAL header")
    m, n = struct.unpack(">HH", data[4:8])
    payload = data[8:]
    if m * n == 0 or len(payload) % (m * n):
        raise ImageFormatError(f"payload of {len(payload)} bytes does not fit {m}x{n}")
    c = len(payload) // (m * n)
    if c not in (1, 3):
        raise ImageFormatError(f"payload implies {c} channels")
    arr = np.frombuffer(payload, dtype=np.uint8).copy()
    return arr.reshape(m, n, 3) if c == 3 else arr.reshape(m, n)


def encode_raw(img: np.ndarray) -> bytes:
    img = np.asarray(img, dtype=np.uint8)
    m, n = img.shape[:2]
    if m > 0xFFFF or n > 0xFFFF:
        raise ImageFormatError("raw format limits each dimension to 65535")
    return RAW_MAGIC + struct.pack(">HH", m, n) + img.tobytes()


def read_image(path: str | Path) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"{path}: {exc.strerror or exc}") from exc
    try:
        if data[:4] == RAW_MAGIC:
            return decode_raw(data)
        return decode_netpbm(data)
    except ImageFormatError as exc:
        raise ImageFormatError(f"{path}: {exc}") from None


def write_image(path: str | Path, img: np.ndarray) -> None:
    path = Path(path)
    data = encode_raw(img) if path.suffix.lower() in (".raw", ".ieal") else encode_netpbm(img)
    path.write_bytes(data)
