import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chromostraight.skeleton import (
    BranchPruneError,
    BranchReport,
    MedialAxis,
    SkeletonError,
    extend_axis,
    mask_axis,
    prune_branches,
    strip_redundant_pixels,
    trace_axis,
    zhang_suen_thin,
)

from .reference import thin_reference


def _pixels(skel):
    return set(map(tuple, np.argwhere(skel)))


def test_thin_three_wide_bar_to_center_line():
    mask = np.zeros((24, 9), dtype=bool)
    mask[2:22, 3:6] = True
    skel = zhang_suen_thin(mask)
    assert np.array_equal(skel, thin_reference(mask))
    rows, cols = np.nonzero(skel)
    assert set(cols) == {4}
    # frozen from the reference trace: tip erosion eats at most two
    # pixels per end of the twenty-row bar
    assert len(rows) == 17
    assert rows.min() == 3 and rows.max() == 19


def test_thin_single_pixel_is_fixpoint():
    mask = np.zeros((5, 5), dtype=bool)
    mask[2, 2] = True
    assert np.array_equal(zhang_suen_thin(mask), mask)


def test_thin_solid_square_matches_reference():
    mask = np.zeros((24, 24), dtype=bool)
    mask[2:22, 2:22] = True
    skel = zhang_suen_thin(mask)
    assert np.array_equal(skel, thin_reference(mask))
    pts = _pixels(skel)
    assert pts <= _pixels(mask)
    endpoints = sum(
        1 for r, c in pts
        if sum((r + dr, c + dc) in pts
               for dr in (-1, 0, 1) for dc in (-1, 0, 1)
               if (dr, dc) != (0, 0)) == 1)
    assert endpoints <= 4


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_thin_matches_reference_and_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    mask = rng.random((16, 16)) < 0.55
    skel = zhang_suen_thin(mask)
    assert np.array_equal(skel, thin_reference(mask))
    assert _pixels(skel) <= _pixels(mask)
    assert np.array_equal(zhang_suen_thin(skel), skel)


def test_trace_straight_line_in_order():
    skel = np.zeros((12, 5), dtype=bool)
    skel[1:11, 2] = True
    axis = trace_axis(skel)
    assert isinstance(axis, MedialAxis)
    assert len(axis) == 10
    assert np.array_equal(axis.points[:, 1], np.full(10, 2))
    assert np.array_equal(axis.points[:, 0], np.arange(1, 11))


def test_trace_y_shape_reports_branches():
    skel = np.zeros((12, 12), dtype=bool)
    skel[6:11, 5] = True          # stem
    for i in range(1, 6):
        skel[6 - i, 5 - i] = True  # left arm
        skel[6 - i, 5 + i] = True  # right arm
    report = trace_axis(skel)
    assert isinstance(report, BranchReport)
    assert len(report.junctions) == 1
    assert len(report.branches) == 3


def test_trace_l_shape_through_corner():
    # the right-angle corner pixel shortcuts diagonally to both arms, so
    # it is stripped first, exactly as mask_axis does before tracing
    skel = np.zeros((9, 9), dtype=bool)
    skel[1:6, 1] = True
    skel[5, 2:7] = True
    axis = trace_axis(strip_redundant_pixels(skel))
    assert isinstance(axis, MedialAxis)
    expected = [(1, 1), (2, 1), (3, 1), (4, 1),
                (5, 2), (5, 3), (5, 4), (5, 5), (5, 6)]
    pts = [tuple(p) for p in axis.points]
    assert pts == expected or pts == expected[::-1]


def test_trace_rejects_cycle():
    # diamond ring: every pixel has exactly two neighbors, no endpoints
    skel = np.zeros((8, 8), dtype=bool)
    for r, c in [(1, 3), (2, 2), (3, 1), (4, 2),
                 (5, 3), (4, 4), (3, 5), (2, 4)]:
        skel[r, c] = True
    with pytest.raises(SkeletonError):
        trace_axis(skel)


def test_trace_rejects_disconnected():
    skel = np.zeros((8, 8), dtype=bool)
    skel[1, 1] = True
    skel[6, 6] = True
    with pytest.raises(SkeletonError):
        trace_axis(skel)


def test_prune_keeps_simple_path():
    skel = np.zeros((8, 30), dtype=bool)
    skel[4, 2:28] = True
    assert np.array_equal(prune_branches(skel, 0.1), skel)


def test_prune_removes_short_spur():
    skel = np.zeros((12, 120), dtype=bool)
    skel[6, 5:105] = True
    for i in range(1, 6):                      # 5-pixel diagonal spur
        skel[6 - i, 50 + i] = True
    pruned = prune_branches(skel, 0.1)         # 5 <= 0.1 * 105
    expected = np.zeros_like(skel)
    expected[6, 5:105] = True
    assert np.array_equal(pruned, expected)


def test_prune_refuses_long_branch():
    skel = np.zeros((50, 120), dtype=bool)
    skel[45, 5:105] = True
    for i in range(1, 41):                     # 40-pixel branch
        skel[45 - i, 50 + i] = True
    with pytest.raises(BranchPruneError) as err:   # 39-px run > 0.1 * 140
        prune_branches(skel, 0.1)
    # the walkable run stops short of the branch's base pixel, which
    # fans into the trunk and counts as the junction itself
    assert 39 in err.value.report.branch_lengths


def test_extend_noop_when_axis_reaches_boundary():
    mask = np.zeros((30, 9), dtype=bool)
    mask[2:28, 3:6] = True
    pts = np.stack([np.arange(2, 28), np.full(26, 4)], axis=1)
    axis = MedialAxis(points=pts)
    out = extend_axis(axis, mask)
    assert np.array_equal(out.points, pts)


def test_extend_walks_to_bar_end():
    # the bar must be wider than twice the gap threshold, otherwise the
    # side walls already satisfy the endpoint-to-boundary distance
    mask = np.zeros((40, 19), dtype=bool)
    mask[2:38, 2:17] = True
    pts = np.stack([np.arange(2, 28), np.full(26, 9)], axis=1)
    axis = MedialAxis(points=pts)
    out = extend_axis(axis, mask)
    added = len(out) - len(axis)
    assert 9 <= added <= 11          # ten rows short, one pixel slack
    assert np.array_equal(out.points[:26], pts)
    assert mask[tuple(out.points.T)].all()
    assert out.arc_length >= axis.arc_length


def test_extend_rejects_single_point_axis():
    mask = np.ones((5, 5), dtype=bool)
    axis = MedialAxis(points=np.array([[2, 2]]))
    with pytest.raises(SkeletonError):
        extend_axis(axis, mask)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_extend_stays_inside_mask(seed):
    rng = np.random.default_rng(seed)
    h = int(rng.integers(40, 70))
    mask = np.zeros((h, 19), dtype=bool)
    top, bot = 2, h - 3
    mask[top:bot + 1, 2:17] = True
    a0 = int(rng.integers(top, top + 12))
    a1 = int(rng.integers(bot - 12, bot))
    pts = np.stack([np.arange(a0, a1 + 1), np.full(a1 - a0 + 1, 9)], axis=1)
    out = extend_axis(MedialAxis(points=pts), mask)
    assert mask[tuple(out.points.T)].all()
    assert out.arc_length >= MedialAxis(points=pts).arc_length


def test_mask_axis_straight_bar_is_collinear():
    mask = np.zeros((80, 15), dtype=bool)
    mask[5:75, 4:11] = True
    axis = mask_axis(mask)
    cols = axis.points[:, 1].astype(np.float64)
    rms = float(np.sqrt(np.mean((cols - 7.0) ** 2)))
    assert rms <= 1.0


def test_strip_redundant_pixels_keeps_endpoints_and_junctions():
    skel = np.zeros((9, 9), dtype=bool)
    skel[4, 1:8] = True
    skel[3, 3] = True            # staircase corner duplicate
    out = strip_redundant_pixels(skel)
    assert not out[3, 3]
    assert out[4, 1] and out[4, 7]
