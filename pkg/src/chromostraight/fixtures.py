"""Synthetic banded-bar images for demos and self-tests.

A fixture is a vertical capsule (a bar with rounded caps) carrying
horizontal intensity bands on a light background: geometrically a
perfectly straight chromosome stand-in with a known medial axis and
length.
"""

from __future__ import annotations

import os

import numpy as np

from .imageio import save_image
from .manifest import SampleRecord, save_manifest

# Band intensities stay well below the background so the histogram keeps
# one dominant valley; Otsu must not be tempted to split dark vs light bands.
BACKGROUND = 230
BAND_RANGE = (40, 100)


def striped_bar(seed: int = 0, height: int = 200, width: int = 48,
                bar_length: int | None = None, bar_width: int = 20,
                period: int | None = None, taper_len: int = 16,
                noise_sigma: float = 5.0) -> tuple[np.ndarray, np.ndarray]:
    """Vertical banded bar with tapered ends; returns (image, true mask).

    Geometry left unspecified is drawn from the seed: total length
    130-160, band period 7-11.  The ends narrow over taper_len rows
    (a pointed profile rather than a round cap): thinning follows a
    taper almost to its tip, so the recovered axis spans the whole
    shape without relying on end-gap recovery, which cannot trigger on
    round caps thinner than its gap threshold.  Mild Gaussian pixel
    noise keeps the histogram spread out like a scanned image instead
    of delta spikes.
    """
    rng = np.random.default_rng(seed)
    if bar_length is None:
        bar_length = int(rng.integers(130, 161))
    if period is None:
        period = int(rng.integers(7, 12))
    if bar_length >= height - 10:
        raise ValueError("bar does not fit the canvas vertically")
    if bar_width + 4 >= width:
        raise ValueError("bar does not fit the canvas horizontally")
    if 2 * taper_len >= bar_length:
        raise ValueError("tapers overlap; bar too short")

    cx = width // 2
    r0 = (height - bar_length) // 2
    r1 = r0 + bar_length - 1
    rows, cols = np.indices((height, width))
    end_dist = np.minimum(rows - r0, r1 - rows)
    # Concave (quadratic) profile: a fat shoulder narrowing to a ~2 px
    # needle, which survives rescale blur and lets thinning run out to
    # the very end instead of eroding a blunt cap.
    t = np.clip(end_dist / taper_len, 0.0, 1.0)
    half = np.maximum(2.0, (bar_width / 2.0) * t * t)
    mask = (end_dist >= 0) & (np.abs(cols - cx) <= half)

    img = np.full((height, width), float(BACKGROUND))
    n_bands = bar_length // period + 2
    bands = rng.integers(BAND_RANGE[0], BAND_RANGE[1] + 1, size=n_bands)
    band_of_row = np.clip((rows - r0) // period, 0, n_bands - 1)
    img[mask] = bands[band_of_row[mask]]
    # Keep the tapers dark: a light band on a 2 px tip would blur into
    # the background and binarize away, costing axis length.
    end_shades = rng.integers(BAND_RANGE[0], 71, size=2)
    tapered = mask & (end_dist < taper_len)
    img[tapered & (rows - r0 < taper_len)] = end_shades[0]
    img[tapered & (r1 - rows < taper_len)] = end_shades[1]
    if noise_sigma > 0:
        img += rng.normal(0.0, noise_sigma, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), mask


def write_fixture_set(out_dir: str | os.PathLike, count: int = 10,
                      seed: int = 0) -> list[SampleRecord]:
    """Write a manifest of straight fixture bars for pipeline demos."""
    os.makedirs(out_dir, exist_ok=True)
    records = []
    for i in range(count):
        sample_id = f"bar{i:03d}"
        img, _ = striped_bar(seed=seed + i)
        filename = f"{sample_id}.png"
        save_image(img, os.path.join(out_dir, filename))
        records.append(SampleRecord(id=sample_id, image_path=filename,
                                    group_id=sample_id, kind="real"))
    save_manifest(records, os.path.join(out_dir, "manifest.json"))
    return records
