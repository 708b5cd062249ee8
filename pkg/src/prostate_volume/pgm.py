"""Binary PGM (P5) mask files.

Only 8-bit files with maxval 255 are accepted. Pixels above 127 are
foreground. Masks are written as 0/255.
"""

import numpy as np

from .core import FrameMask, PixelSpacing
from .errors import PGMFormatError

__all__ = ["decode_mask", "encode_mask", "read_pgm_header"]

_WHITESPACE = b" \t\n\r\v\f"


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PGMFormatError("truncated header")
    return data[start:pos], pos


def read_pgm_header(data: bytes) -> tuple[int, int, int, int]:
    """Return ``(width, height, maxval, offset)`` where offset is the first payload byte."""
    if data[:2] != b"P5":
        raise PGMFormatError(f"not a binary PGM: magic {data[:2]!r}, expected b'P5'")
    pos = 2
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise PGMFormatError("malformed header after magic number")
    values = []
    for name in ("width", "height", "maxval"):
        tok, pos = _next_token(data, pos)
        try:
            values.append(int(tok))
        except ValueError:
            raise PGMFormatError(f"bad {name} field {tok!r}") from None
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise PGMFormatError("truncated header")
    width, height, maxval = values
    if width < 1 or height < 1:
        raise PGMFormatError(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise PGMFormatError(f"maxval must be 255, got {maxval}")
    return width, height, maxval, pos + 1


def decode_mask(data: bytes, spacing: PixelSpacing) -> FrameMask:
    width, height, _, offset = read_pgm_header(data)
    need = width * height
    payload = data[offset:]
    if len(payload) < need:
        raise PGMFormatError(
            f"truncated payload: {len(payload)} bytes for {width}x{height} image, need {need}"
        )
    img = np.frombuffer(payload, dtype=np.uint8, count=need).reshape(height, width)
    return FrameMask(img > 127, spacing)


def encode_mask(mask: FrameMask) -> bytes:
    header = b"P5\n%d %d\n255\n" % (mask.width, mask.height)
    return header + (mask.pixels.astype(np.uint8) * 255).tobytes()
