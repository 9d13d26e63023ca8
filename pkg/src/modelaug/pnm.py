"""Netpbm graymap/pixmap reading and writing (P2, P3, P5, P6).

Pixels are returned as floats in [0, 1]: raw sample divided by maxval.
"""

import numpy as np

from .errors import FormatError
from .imaging import as_image

_CHANNELS = {b"P2": 1, b"P5": 1, b"P3": 3, b"P6": 3}


def _tokens(data, count, pos):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated header")
        out.append(data[start:pos])
    return out, pos


def parse_pnm(data):
    magic = data[:2]
    if magic not in _CHANNELS:
        raise FormatError(f"unsupported magic number {magic!r}")
    channels = _CHANNELS[magic]
    try:
        (w, h, maxval), pos = _tokens(data, 3, 2)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError("non-integer header field") from None
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise FormatError(f"bad dimensions {w}x{h} or maxval {maxval}")
    count = w * h * channels
    if magic in (b"P5", b"P6"):
        pos += 1  # exactly one whitespace byte before the raster
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raster = data[pos:pos + count * dtype.itemsize]
        if len(raster) != count * dtype.itemsize:
            raise FormatError("truncated raster")
        values = np.frombuffer(raster, dtype=dtype).astype(np.float64)
    else:
        try:
            values = np.array([int(t) for t in data[pos:].split()[:count]], dtype=np.float64)
        except ValueError:
            raise FormatError("non-integer sample in plain raster") from None
        if values.size != count:
            raise FormatError("truncated raster")
    if values.max(initial=0) > maxval:
        raise FormatError("sample exceeds maxval")
    return values.reshape(h, w, channels) / maxval


def read_pnm(path):
    with open(path, "rb") as fh:
        return parse_pnm(fh.read())


def encode_pnm(img, maxval=255):
    """Binary P5/P6 bytes; values are clipped to [0, 1] and rounded."""
    img = as_image(img)
    h, w, c = img.shape
    if c not in (1, 3):
        raise FormatError(f"cannot store {c}-channel image as PNM")
    magic = b"P5" if c == 1 else b"P6"
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    return magic + f"\n{w} {h}\n{maxval}\n".encode() + q.astype(dtype).tobytes()


def write_pnm(path, img, maxval=255):
    with open(path, "wb") as fh:
        fh.write(encode_pnm(img, maxval))
