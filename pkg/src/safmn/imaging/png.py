"""Minimal PNG codec for 8-bit images, built directly on zlib.

Decoding accepts 8-bit grayscale (replicated to 3 channels), RGB, and their
alpha variants (alpha dropped); palette, interlaced, and non-8-bit files are
rejected.  Encoding always writes filter-0 truecolor rows at a fixed zlib
level, so re-encoding the same pixels is byte-identical.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from ..errors import DecodeError, DimensionError, UnsupportedFormatError
from ..tensor import default_dtype

_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_ZLIB_LEVEL = 6


@dataclass
class ImageBuffer:
    """8-bit RGB raster stored as a (h, w, 3) uint8 array."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
            raise DimensionError(f"ImageBuffer needs (h, w, 3) uint8 data, got {arr.shape} {arr.dtype}")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def to_planes(self) -> np.ndarray:
        """Float view in [0, 1], channel-first (3, h, w)."""
        return (self.data.astype(default_dtype()) / 255.0).transpose(2, 0, 1)

    @classmethod
    def from_planes(cls, planes: np.ndarray) -> "ImageBuffer":
        """Quantize channel-first float planes in [0, 1] to 8-bit."""
        planes = np.asarray(planes)
        if planes.ndim != 3 or planes.shape[0] != 3:
            raise DimensionError(f"expected (3, h, w) planes, got {planes.shape}")
        quant = np.clip(np.rint(planes * 255.0), 0, 255).astype(np.uint8)
        return cls(quant.transpose(1, 2, 0))


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def _unfilter(raw: bytes, width: int, height: int, channels: int) -> np.ndarray:
    # All predictor arithmetic is mod 256 by definition; work in int32.
    stride = width * channels
    if len(raw) != height * (stride + 1):
        raise DecodeError(
            f"decompressed size {len(raw)} != expected {height * (stride + 1)}"
        )
    out = np.zeros((height, stride), dtype=np.int32)
    raw_arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, stride + 1).astype(np.int32)
    prev = np.zeros(stride, dtype=np.int32)
    for row in range(height):
        ftype = raw_arr[row, 0]
        line = raw_arr[row, 1:].copy()
        if ftype == 0:
            pass
        elif ftype == 2:  # Up
            line = (line + prev) & 0xFF
        elif ftype in (1, 3, 4):  # Sub / Average / Paeth: sequential in x
            for x in range(stride):
                left = int(line[x - channels]) if x >= channels else 0
                up = int(prev[x])
                ul = int(prev[x - channels]) if x >= channels else 0
                if ftype == 1:
                    pred = left
                elif ftype == 3:
                    pred = (left + up) // 2
                else:
                    pred = _paeth(left, up, ul)
                line[x] = (line[x] + pred) & 0xFF
        else:
            raise DecodeError(f"unknown filter type {ftype} on row {row}")
        out[row] = line
        prev = line
    return out.astype(np.uint8).reshape(height, width, channels)


def decode_png(path) -> ImageBuffer:
    """Decode an 8-bit PNG file into an RGB buffer."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _SIGNATURE:
        raise DecodeError(f"{path}: not a PNG file (bad signature)")
    pos = 8
    ihdr = None
    idat = bytearray()
    seen_iend = False
    while pos < len(blob):
        if pos + 8 > len(blob):
            raise DecodeError(f"{path}: truncated chunk header")
        length, ctype = struct.unpack(">I4s", blob[pos : pos + 8])
        body = blob[pos + 8 : pos + 8 + length]
        if len(body) != length or pos + 12 + length > len(blob):
            raise DecodeError(f"{path}: truncated {ctype.decode(errors='replace')} chunk")
        crc = struct.unpack(">I", blob[pos + 8 + length : pos + 12 + length])[0]
        if zlib.crc32(ctype + body) & 0xFFFFFFFF != crc:
            raise DecodeError(f"{path}: CRC mismatch in {ctype.decode(errors='replace')} chunk")
        if ctype == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", body)
        elif ctype == b"IDAT":
            idat.extend(body)
        elif ctype == b"IEND":
            seen_iend = True
            break
        pos += 12 + length
    if ihdr is None:
        raise DecodeError(f"{path}: missing IHDR chunk")
    if not seen_iend:
        raise DecodeError(f"{path}: missing IEND chunk")
    width, height, bit_depth, color_type, compression, filter_method, interlace = ihdr
    if bit_depth != 8:
        raise UnsupportedFormatError(f"{path}: {bit_depth}-bit PNG not supported (8-bit only)")
    if color_type not in (0, 2, 4, 6):
        raise UnsupportedFormatError(f"{path}: color type {color_type} not supported")
    if compression != 0 or filter_method != 0:
        raise DecodeError(f"{path}: nonstandard compression/filter method")
    if interlace != 0:
        raise UnsupportedFormatError(f"{path}: interlaced PNG not supported")
    if width < 1 or height < 1:
        raise DecodeError(f"{path}: empty image {width}x{height}")
    channels = {0: 1, 2: 3, 4: 2, 6: 4}[color_type]
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise DecodeError(f"{path}: corrupt image data ({exc})") from exc
    pixels = _unfilter(raw, width, height, channels)
    if color_type == 0:
        rgb = np.repeat(pixels, 3, axis=2)
    elif color_type == 2:
        rgb = pixels
    elif color_type == 4:
        rgb = np.repeat(pixels[:, :, :1], 3, axis=2)
    else:
        rgb = pixels[:, :, :3]
    return ImageBuffer(np.ascontiguousarray(rgb))


def _chunk(ctype: bytes, body: bytes) -> bytes:
    return (
        struct.pack(">I", len(body))
        + ctype
        + body
        + struct.pack(">I", zlib.crc32(ctype + body) & 0xFFFFFFFF)
    )


def encode_png(img: ImageBuffer, path) -> None:
    """Write an RGB buffer as a truecolor PNG (lossless round trip)."""
    h, w = img.height, img.width
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    rows = np.zeros((h, w * 3 + 1), dtype=np.uint8)
    rows[:, 1:] = img.data.reshape(h, w * 3)
    payload = zlib.compress(rows.tobytes(), _ZLIB_LEVEL)
    blob = _SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", payload) + _chunk(b"IEND", b"")
    with open(path, "wb") as fh:
        fh.write(blob)
