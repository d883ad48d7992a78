"""Foreground extraction for single-chromosome crops.

Thresholding follows Otsu's criterion; a pixel of value v is foreground
when v < threshold (dark objects on a light background) unless the
polarity is flipped.  Hole filling closes enclosed background regions
using 4-connectivity.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage


class SegmentationError(ValueError):
    """Raised when an image cannot be split into two intensity classes."""


def otsu_threshold(hist: np.ndarray) -> int:
    """Threshold maximizing between-class variance.

    The returned value T partitions intensities into {v < T} and
    {v >= T}.  Ties resolve toward the lower threshold.  A histogram
    with fewer than two populated bins is unsegmentable.
    """
    hist = np.asarray(hist, dtype=np.float64)
    if hist.shape != (256,):
        raise ValueError(f"expected 256 bins, got shape {hist.shape}")
    if np.any(hist < 0):
        raise ValueError("histogram bins must be non-negative")
    if np.count_nonzero(hist) < 2:
        raise SegmentationError("histogram has fewer than two populated bins")

    values = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)                 # w0[t] = weight of {v <= t}
    m0 = np.cumsum(hist * values)        # unnormalized first moment
    total_w = w0[-1]
    total_m = m0[-1]

    # Candidate thresholds T = 1..255 split at {v < T} / {v >= T}.
    w_lo = w0[:-1]
    w_hi = total_w - w_lo
    valid = (w_lo > 0) & (w_hi > 0)
    mu_lo = np.divide(m0[:-1], w_lo, out=np.zeros(255), where=valid)
    mu_hi = np.divide(total_m - m0[:-1], w_hi, out=np.zeros(255), where=valid)
    variance = np.where(valid, w_lo * w_hi * (mu_lo - mu_hi) ** 2, -1.0)
    best = int(np.argmax(variance))      # argmax takes the first (lowest) tie
    if variance[best] < 0:
        raise SegmentationError("no threshold separates two classes")
    return best + 1


def binarize(img: np.ndarray, threshold: int, dark_foreground: bool = True) -> np.ndarray:
    """Boolean foreground mask; each pixel lands in exactly one class."""
    img = np.asarray(img)
    if dark_foreground:
        return img < threshold
    return img >= threshold


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Fill background regions not 4-connected to the image border."""
    mask = np.asarray(mask, dtype=bool)
    return ndimage.binary_fill_holes(mask)


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Keep only the largest 8-connected foreground component."""
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if count <= 1:
        return mask.copy()
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def background_mean(img: np.ndarray, mask: np.ndarray) -> float:
    """Mean intensity over the mask complement (the background).

    Complement pixels touching the mask are partly object (edge blur
    puts them between the two levels); averaging them in drags the
    estimate darker every time an image is re-rendered with this value
    as its fill.  A two-pixel guard ring around the mask is therefore
    left out whenever enough clean background remains.
    """
    img = np.asarray(img)
    mask = np.asarray(mask, dtype=bool)
    clean = ~ndimage.binary_dilation(mask, iterations=2)
    if clean.sum() < 16:
        clean = ~mask
    bg = img[clean]
    if bg.size == 0:
        return float(img.mean())
    return float(bg.mean())


def segment(img: np.ndarray, smooth_window: int = 3, dark_foreground: bool = True) -> np.ndarray:
    """Full mask extraction: smoothed-histogram Otsu, binarize, fill holes.

    Keeps the largest connected component so stray specks never reach
    the skeleton stage.
    """
    from .imageio import histogram, smooth_histogram

    hist = smooth_histogram(histogram(img), smooth_window)
    t = otsu_threshold(hist)
    mask = binarize(img, t, dark_foreground=dark_foreground)
    if not mask.any():
        raise SegmentationError("threshold produced an empty foreground")
    return largest_component(fill_holes(mask))
