"""8-bit RGB image I/O through Pillow. Output is lossless only."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

MAX_PIXELS = 1 << 26
LOSSLESS = {".png": "PNG", ".bmp": "BMP"}
READABLE = {".png", ".bmp", ".jpg", ".jpeg"}


class ImageIOError(OSError):
    pass


class LossyFormatError(ValueError):
    pass


def read_image(path) -> np.ndarray:
    """Load an image as an (H, W, 3) uint8 array; single-plane input is replicated."""
    p = Path(path)
    if p.suffix.lower() not in READABLE:
        raise ImageIOError(f"{p}: unsupported image format {p.suffix!r}")
    try:
        with Image.open(p) as im:
            if im.width * im.height > MAX_PIXELS:
                raise ImageIOError(f"{p}: {im.width}x{im.height} exceeds the {MAX_PIXELS}-pixel limit")
            if im.mode in ("I;16", "I;16B", "I", "F"):
                raise ImageIOError(f"{p}: only 8-bit images are supported (mode {im.mode})")
            arr = np.asarray(im.convert("L" if im.mode in ("L", "1", "P") and _is_gray(im) else "RGB"))
    except ImageIOError:
        raise
    except (OSError, ValueError, Image.DecompressionBombError) as e:
        raise ImageIOError(f"{p}: cannot read image: {e}") from e
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    return np.ascontiguousarray(arr, dtype=np.uint8)


def _is_gray(im: Image.Image) -> bool:
    if im.mode != "P":
        return True
    pal = im.getpalette() or []
    return all(pal[i] == pal[i + 1] == pal[i + 2] for i in range(0, len(pal), 3))


def write_image(path, arr: np.ndarray) -> None:
    p = Path(path)
    fmt = LOSSLESS.get(p.suffix.lower())
    if fmt is None:
        raise LossyFormatError(f"{p}: output must be PNG or BMP; lossy formats destroy LSB payloads")
    a = np.asarray(arr)
    if a.dtype != np.uint8:
        raise ValueError("image must be uint8")
    mode = "L" if a.ndim == 2 else "RGB"
    try:
        # Fixed compression settings keep repeated runs byte-identical.
        kw = {"optimize": False, "compress_level": 6} if fmt == "PNG" else {}
        Image.fromarray(a, mode=mode).save(p, format=fmt, **kw)
    except OSError as e:
        raise ImageIOError(f"{p}: cannot write image: {e}") from e
