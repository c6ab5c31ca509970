"""Synthetic cover images for tests and sweeps.

Standard test pictures (Lena, Baboon, ...) are not redistributed; these
generators give reproducible stand-ins with the ingredients that matter to
the similarity map: smooth shading, hard region boundaries, fine texture and
sensor-like grain in the low bits.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

KINDS = ("natural", "gradient", "noise", "texture", "mosaic")


def _rescale(a: np.ndarray, lo: float, hi: float) -> np.ndarray:
    a = a - a.min()
    m = a.max()
    return lo + (hi - lo) * (a / m if m > 0 else a)


def _smooth_field(rng, h, w, sigma) -> np.ndarray:
    return ndimage.gaussian_filter(rng.normal(size=(h, w, 3)), (sigma, sigma, 0), mode="wrap")


def _regions(rng, h, w, n) -> np.ndarray:
    """Piecewise-constant colour cells (nearest-seed partition)."""
    seeds = rng.uniform(0, 1, size=(n, 2)) * (h, w)
    yy, xx = np.mgrid[0:h, 0:w]
    d = (yy[..., None] - seeds[:, 0]) ** 2 + (xx[..., None] - seeds[:, 1]) ** 2
    lab = d.argmin(axis=2)
    colors = rng.uniform(20, 235, size=(n, 3))
    return colors[lab]


def _finish(a: np.ndarray, rng, grain: float) -> np.ndarray:
    if grain:
        a = a + rng.normal(0.0, grain, size=a.shape)
    return np.clip(np.rint(a), 0, 255).astype(np.uint8)


def make_cover(kind: str = "natural", size: int | tuple[int, int] = 512, seed: int = 0,
               grain: float = 2.0) -> np.ndarray:
    """(H, W, 3) uint8 synthetic cover of the given kind."""
    h, w = (size, size) if isinstance(size, int) else size
    rng = np.random.default_rng(seed)
    if kind == "gradient":
        yy, xx = np.mgrid[0:h, 0:w]
        a = np.stack([xx / max(w - 1, 1) * 200 + 30, yy / max(h - 1, 1) * 200 + 30,
                      (xx + yy) / max(h + w - 2, 1) * 200 + 30], axis=2)
    elif kind == "noise":
        a = rng.uniform(0, 256, size=(h, w, 3))
        grain = 0.0
    elif kind == "texture":
        a = _rescale(_smooth_field(rng, h, w, 1.0), 0, 255)
    elif kind == "mosaic":
        a = _regions(rng, h, w, max(8, h * w // 4096))
    elif kind == "natural":
        shade = _rescale(_smooth_field(rng, h, w, max(h, w) / 16), -40, 40)
        cells = _regions(rng, h, w, max(6, h * w // 16384))
        fine = _smooth_field(rng, h, w, 0.8)
        fine /= fine.std()
        # fur-like texture confined to a few soft blobs
        mask = _rescale(ndimage.gaussian_filter(rng.normal(size=(h, w)), max(h, w) / 24, mode="wrap"), 0, 1)
        mask = np.clip((mask - 0.5) * 5, 0, 1)[..., None]
        a = cells + shade + mask * 40 * fine
    else:
        raise ValueError(f"unknown cover kind {kind!r}; choose from {KINDS}")
    return _finish(a, rng, grain)


def cover_set(n: int = 10, size: int = 512, seed: int = 0) -> list[tuple[str, np.ndarray]]:
    """``n`` natural-like covers with distinct seeds, named ``synth-00`` ..."""
    return [(f"synth-{i:02d}", make_cover("natural", size, seed + i)) for i in range(n)]
