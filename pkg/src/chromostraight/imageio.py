"""Grayscale image I/O and histogram utilities.

All images in this package are 2-D uint8 numpy arrays indexed as
(row, col).  Files on disk are 8-bit grayscale PNG, non-interlaced.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load an image file as a 2-D uint8 array.

    Color inputs are converted to grayscale by luminance; grayscale
    inputs round-trip unchanged.
    """
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError(f"expected a single-channel image, got shape {arr.shape}")
    return arr


def save_image(img: np.ndarray, path: str | os.PathLike) -> None:
    """Write a 2-D uint8 array as an 8-bit grayscale, non-interlaced PNG."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {img.dtype}")
    Image.fromarray(img, mode="L").save(path, format="PNG")


def histogram(img: np.ndarray) -> np.ndarray:
    """256-bin intensity histogram; bin sum equals the pixel count."""
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {img.dtype}")
    return np.bincount(img.ravel(), minlength=256).astype(np.int64)


def smooth_histogram(hist: np.ndarray, window: int = 3) -> np.ndarray:
    """Median-filter a histogram with the given odd window width.

    Edge bins use the window clamped to the valid bin range, so the two
    outermost bins are medians over fewer samples.  window=1 is the
    identity.
    """
    hist = np.asarray(hist, dtype=np.float64)
    if hist.shape != (256,):
        raise ValueError(f"expected 256 bins, got shape {hist.shape}")
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    if window == 1:
        return hist.copy()
    half = window // 2
    out = np.empty_like(hist)
    for i in range(256):
        lo = max(0, i - half)
        hi = min(256, i + half + 1)
        out[i] = np.median(hist[lo:hi])
    return out
