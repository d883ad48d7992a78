import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chromostraight.imageio import histogram
from chromostraight.segmentation import (
    SegmentationError,
    background_mean,
    binarize,
    fill_holes,
    largest_component,
    otsu_threshold,
    segment,
)

from .reference import otsu_scan


def test_otsu_separates_two_point_histogram():
    h = np.zeros(256)
    h[10] = 50
    h[200] = 50
    t = otsu_threshold(h)
    assert 10 < t <= 200
    assert t == 11  # ties across the empty valley resolve low


def test_otsu_degenerate_single_value():
    h = np.zeros(256)
    h[128] = 100
    with pytest.raises(SegmentationError):
        otsu_threshold(h)


def test_otsu_three_level_matches_scan():
    h = np.zeros(256)
    h[20], h[100], h[220] = 40, 10, 50
    t = otsu_threshold(h)
    assert t == otsu_scan(h)
    assert t == 101


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_otsu_matches_exhaustive_scan(seed):
    rng = np.random.default_rng(seed)
    h = np.zeros(256)
    # a few populated spans, like a quantized bimodal-ish histogram
    for _ in range(rng.integers(2, 6)):
        lo = int(rng.integers(0, 250))
        width = int(rng.integers(1, 30))
        h[lo:lo + width] += rng.integers(1, 500, size=min(width, 256 - lo))
    if np.count_nonzero(h) < 2:
        h[0] += 1
        h[255] += 1
    assert otsu_threshold(h) == otsu_scan(h)


def test_binarize_checkerboard():
    img = np.indices((4, 4)).sum(axis=0) % 2 * 255
    mask = binarize(img.astype(np.uint8), 128)
    assert np.array_equal(mask, img == 0)


def test_binarize_threshold_zero_dark_foreground_empty():
    img = np.arange(16, dtype=np.uint8).reshape(4, 4)
    assert not binarize(img, 0).any()


def test_binarize_recovers_exact_bar():
    img = np.full((40, 40), 220, dtype=np.uint8)
    bar = np.zeros((40, 40), dtype=bool)
    bar[5:35, 15:25] = True
    img[bar] = 30
    t = otsu_threshold(histogram(img))
    assert np.array_equal(binarize(img, t), bar)


def test_fill_holes_closes_ring():
    mask = np.zeros((11, 11), dtype=bool)
    mask[2:9, 2:9] = True
    mask[4:7, 4:7] = False
    filled = fill_holes(mask)
    disk = np.zeros((11, 11), dtype=bool)
    disk[2:9, 2:9] = True
    assert np.array_equal(filled, disk)


def test_fill_holes_identity_on_solid():
    mask = np.ones((6, 6), dtype=bool)
    assert np.array_equal(fill_holes(mask), mask)


def test_fill_holes_two_rings_keep_border_gap():
    mask = np.zeros((9, 19), dtype=bool)
    for c0 in (1, 11):
        mask[1:8, c0:c0 + 7] = True
        mask[3:6, c0 + 2:c0 + 5] = False
    filled = fill_holes(mask)
    assert filled[4, 3] and filled[4, 13]   # both holes now solid
    assert not filled[4, 9]                  # gap reaches the border, stays


@given(arrays(bool, st.tuples(st.integers(2, 16), st.integers(2, 16))))
@settings(max_examples=60, deadline=None)
def test_fill_holes_idempotent_and_monotone(mask):
    once = fill_holes(mask)
    assert (once | mask).sum() == once.sum()   # output contains input
    assert np.array_equal(fill_holes(once), once)


def test_largest_component_drops_speck():
    mask = np.zeros((10, 10), dtype=bool)
    mask[1:8, 1:4] = True
    mask[8, 8] = True
    out = largest_component(mask)
    assert out[4, 2] and not out[8, 8]


def test_background_mean_ignores_object():
    img = np.full((20, 20), 200, dtype=np.uint8)
    mask = np.zeros((20, 20), dtype=bool)
    mask[5:15, 5:15] = True
    img[mask] = 10
    assert background_mean(img, mask) == pytest.approx(200.0)


def test_segment_requires_two_populated_bins():
    with pytest.raises(SegmentationError):
        segment(np.full((8, 8), 3, dtype=np.uint8))


def test_segment_extracts_dark_bar():
    rng = np.random.default_rng(5)
    img = np.full((50, 30), 220, dtype=np.uint8)
    bar = np.zeros((50, 30), dtype=bool)
    bar[10:40, 12:20] = True
    img[bar] = 40
    noisy = np.clip(img + rng.normal(0, 3, img.shape), 0, 255).astype(np.uint8)
    mask = segment(noisy)
    assert (mask & bar).sum() / bar.sum() > 0.95
    assert (mask & ~bar).sum() < 10
