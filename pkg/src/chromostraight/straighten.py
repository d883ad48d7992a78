"""Patch-based straightening along the medial axis.

A bent chromosome is resampled as a run of small rectangular patches
whose rows follow the local axis direction; stacking the patches
vertically yields the straightened image.  A classical whole-row
variant (one perpendicular scan line per axis point) is included as a
comparison baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .skeleton import (
    BranchReport,
    MedialAxis,
    SkeletonError,
    prune_branches,
    strip_redundant_pixels,
    trace_axis,
    zhang_suen_thin,
)


def bilinear_sample(img: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                    fill: float) -> np.ndarray:
    """Bilinear interpolation at float (row, col) positions.

    Samples outside the image blend toward the fill value; positions a
    full pixel outside return it exactly.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    r0 = np.floor(rows)
    c0 = np.floor(cols)
    fr = rows - r0
    fc = cols - c0
    r0 = r0.astype(np.int64)
    c0 = c0.astype(np.int64)

    out = np.zeros(rows.shape, dtype=np.float64)
    for dr, wr in ((0, 1.0 - fr), (1, fr)):
        for dc, wc in ((0, 1.0 - fc), (1, fc)):
            rr = r0 + dr
            cc = c0 + dc
            inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            vals = np.where(
                inside, img[np.clip(rr, 0, h - 1), np.clip(cc, 0, w - 1)], fill)
            out += wr * wc * vals
    return out


def _border_background(img: np.ndarray) -> float:
    """Fallback fill estimate: median of the one-pixel border ring."""
    ring = np.concatenate([img[0, :], img[-1, :], img[1:-1, 0], img[1:-1, -1]])
    return float(np.median(ring))


@dataclass(frozen=True)
class PatchSequence:
    """Rotated patches cut along an axis, in axis order.

    pixels: (count, patch_h, patch_w) float samples
    centers: (count, 2) float axis positions, patch_h apart in arc length
    angles: (count,) radians from the vertical (image row) direction
    """

    pixels: np.ndarray
    centers: np.ndarray
    angles: np.ndarray
    background: float

    def __len__(self) -> int:
        return len(self.pixels)

    @property
    def patch_shape(self) -> tuple[int, int]:
        return self.pixels.shape[1], self.pixels.shape[2]


def _subpixel_centerline(points: np.ndarray, half: int = 3) -> np.ndarray:
    """Windowed mean of the integer axis points.

    Thinning quantizes the centerline to the pixel grid, so raw axis
    points wobble laterally by up to half a pixel.  Sampling patch
    centers off that staircase shifts each patch's content sideways by
    a random sub-pixel amount, which shows up as jagged seams in the
    restacked image.  A short symmetric mean (window shrinks near the
    ends) recovers the sub-pixel centerline without changing the axis
    itself.
    """
    pts = points.astype(np.float64)
    n = len(pts)
    idx = np.arange(n)
    h = np.minimum(half, np.minimum(idx, n - 1 - idx))
    cum = np.vstack([np.zeros(2), np.cumsum(pts, axis=0)])
    lo = idx - h
    hi = idx + h + 1
    return (cum[hi] - cum[lo]) / (hi - lo)[:, None]


def _axis_interpolator(axis: MedialAxis):
    """Map arc-length positions to float (row, col) along the sub-pixel
    centerline of the axis polyline.

    Positions beyond either end continue straight along the end
    direction, so a patch frame overhanging the axis keeps a sensible
    orientation instead of piling up on the last point.
    """
    pts = _subpixel_centerline(axis.points)
    steps = np.hypot(*np.diff(pts, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    total = float(cum[-1])

    def end_dir(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        d = b - a
        n = np.hypot(d[0], d[1])
        return d / n if n > 0 else np.array([1.0, 0.0])

    # A one-point secant would swing 45 degrees whenever the last two
    # integer axis points happen to step diagonally; take the direction
    # over several smoothed points so a single tip wobble cannot flip it.
    m = min(8, len(pts) - 1)
    d_head = end_dir(pts[m], pts[0])
    d_tail = end_dir(pts[-1 - m], pts[-1])

    def at(s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        out = np.stack([np.interp(s, cum, pts[:, 0]),
                        np.interp(s, cum, pts[:, 1])], axis=-1)
        low = s < 0.0
        high = s > total
        if np.any(low):
            out[low] = pts[0] + (-s[low])[..., None] * d_head
        if np.any(high):
            out[high] = pts[-1] + (s[high] - total)[..., None] * d_tail
        return out

    return at, total


def _recenter_on_profile(img: np.ndarray, threshold: float,
                         centers: np.ndarray, angles: np.ndarray,
                         max_shift: float = 1.5, halfspan: float = 12.0,
                         ) -> tuple[np.ndarray, float | None]:
    """Nudge each patch center to the midpoint of its intensity profile.

    The thinned axis is only pixel-accurate; a patch frame off the true
    centerline by a fraction of a pixel shifts its content sideways,
    and neighbouring patches drift independently, leaving one-pixel
    jogs at the seams of the restacked image.  The gray-level ramp at
    the object's edges carries sub-pixel position, so each center is
    moved to the midpoint between the two threshold crossings along its
    normal (dark foreground, as in binarize).  Shifts are clamped so a
    degenerate profile cannot drag a center off the axis.

    Returns the adjusted centers and the mean half-width of the object
    along the measured cross-sections (None when nothing was measured).
    """
    gray = np.asarray(img, dtype=np.float64)
    fill = float(gray.max()) if gray.size else 255.0
    offs = np.arange(-halfspan, halfspan + 0.25, 0.25)
    mid = np.searchsorted(offs, 0.0)

    def level_cross(vals: np.ndarray, edge: int) -> float | None:
        """Sub-pixel crossing index at the edge's half-amplitude level.

        A fixed-threshold crossing slides with the local foreground
        shade (a light band's ramp reaches the threshold deeper inside
        the object than a dark band's), which skews the midpoint
        wherever the two sides of a cut sample different bands.  The
        blur profile always crosses the midpoint of its own plateaus at
        the geometric edge, so the level is derived per edge.  vals
        must run from outside to inside; edge is the first index on the
        inside of the threshold.
        """
        inner = vals[edge + 2:edge + 7]
        outer = vals[max(0, edge - 7):edge - 2]
        if inner.size < 3 or outer.size < 3:
            return None
        level = (float(np.mean(inner)) + float(np.mean(outer))) / 2.0
        for j in range(max(1, edge - 6), min(len(vals), edge + 6)):
            a, b = vals[j - 1], vals[j]
            if a >= level > b:
                frac = (a - level) / (a - b) if a != b else 0.5
                return (j - 1) + frac
        return None

    def crossings(base: np.ndarray, n: np.ndarray) -> tuple[float, float] | None:
        vals = bilinear_sample(gray, base[0] + offs * n[0],
                               base[1] + offs * n[1], fill)
        inside = vals < threshold
        if not inside[mid]:
            return None
        lo = mid
        while lo > 0 and inside[lo - 1]:
            lo -= 1
        hi = mid
        while hi < len(offs) - 1 and inside[hi + 1]:
            hi += 1
        if lo == 0 or hi == len(offs) - 1:
            return None
        li = level_cross(vals, lo)
        ri = level_cross(vals[::-1], len(offs) - 1 - hi)
        if li is None:
            left = offs[lo - 1] + 0.25 * (vals[lo - 1] - threshold) / (vals[lo - 1] - vals[lo])
        else:
            left = -halfspan + 0.25 * li
        if ri is None:
            right = offs[hi] + 0.25 * (threshold - vals[hi]) / (vals[hi + 1] - vals[hi])
        else:
            right = halfspan - 0.25 * ri
        return left, right

    count = len(centers)
    shifts = np.full(count, np.nan)
    halves: list[float] = []
    normals = np.stack([-np.sin(angles), np.cos(angles)], axis=1)
    for k in range(count):
        d = np.array([np.cos(angles[k]), np.sin(angles[k])])
        # One cross-section is hostage to local shading; average a few
        # spread over the patch's span so stripe boundaries cancel out.
        cuts = [c for dv in (-3.0, -1.0, 1.0, 3.0)
                if (c := crossings(centers[k] + dv * d, normals[k])) is not None]
        if not cuts:
            continue
        left = float(np.mean([c[0] for c in cuts]))
        right = float(np.mean([c[1] for c in cuts]))
        shifts[k] = (left + right) / 2.0
        halves.append((right - left) / 2.0)
    if not halves:
        return centers.copy(), None
    # Neighbouring patches see the same physical midline, so residual
    # disagreement between them is measurement noise; a short smoothing
    # of the shift sequence removes it without flattening real bends,
    # whose scale is many patches.
    valid = ~np.isnan(shifts)
    idx = np.arange(count)
    shifts = np.interp(idx, idx[valid], shifts[valid])
    shifts = np.clip(shifts, -max_shift, max_shift)
    return centers + shifts[:, None] * normals, float(np.median(halves))


def _alias_phase(anchor: float, halfwidth: float) -> float:
    """Sub-pixel lateral offset that keeps both object edges stable.

    Binarizing the restacked image re-quantizes the object's edges on
    the pixel grid; an edge whose gray-level crossing hovers near an
    integer column flips back and forth between columns under the
    stripe-to-stripe shading variation, speckling an otherwise straight
    contour with one-pixel jogs.  Placing the object so that both edge
    crossings land as close to half-integer positions as possible gives
    the contour the largest margin against that flicker.
    """
    cand = np.linspace(-0.5, 0.5, 41)
    edges = anchor + np.array([[-halfwidth], [halfwidth]]) + cand
    frac = edges - np.floor(edges)
    margin = np.minimum(frac, 1.0 - frac).min(axis=0)
    return float(cand[np.argmax(margin)])


def extract_patches(img: np.ndarray, axis: MedialAxis, patch_h: int = 8,
                    patch_w: int = 16, background: float | None = None,
                    center_threshold: float | None = None) -> PatchSequence:
    """Cut patch_h x patch_w patches whose rows track the axis.

    Patch k covers arc positions [k*patch_h, (k+1)*patch_h); its
    rotation is the direction from its center to the next patch center
    (the last patch reuses the previous angle).  The final patch covers
    whatever arc remains past the last full one, overhanging the axis
    end, so the object's tip is never cut off at a patch boundary.
    Samples beyond the image yield the background value.  With
    center_threshold (the segmentation threshold), each center is
    refined to the sub-pixel midpoint of its cross-section.
    """
    img = np.asarray(img)
    if patch_h < 1 or patch_w < 1:
        raise ValueError("patch dimensions must be positive")
    if background is None:
        background = _border_background(img)

    at, total = _axis_interpolator(axis)
    if total < patch_h:
        raise ValueError(
            f"axis arc length {total:.1f} shorter than patch height {patch_h}")
    count = int(np.ceil(total / patch_h))
    # Centers sit mid-patch so the sample rows land on integer arc
    # positions k*patch_h + r; a perfectly vertical axis then resamples
    # the source rows exactly.
    arc_centers = np.arange(count) * patch_h + (patch_h - 1) / 2.0
    centers = at(arc_centers)

    if count >= 2:
        # Centered secant: the one-sided secant to the next center
        # describes the direction half a patch ahead of the patch
        # middle, which tilts every patch by curvature * patch_h / 2
        # and leaves jogs at the seams of the restacked image.
        lo = np.maximum(np.arange(count) - 1, 0)
        hi = np.minimum(np.arange(count) + 1, count - 1)
        diffs = centers[hi] - centers[lo]
        angles = np.arctan2(diffs[:, 1], diffs[:, 0])
    else:
        overall = (axis.points[-1] - axis.points[0]).astype(np.float64)
        angles = np.array([np.arctan2(overall[1], overall[0])])

    if center_threshold is not None:
        centers, halfwidth = _recenter_on_profile(img, center_threshold,
                                                  centers, angles)
        if count >= 2:
            # The refined centers describe the true midline better than
            # the thinned axis did, so take the rotation from them too.
            lo = np.maximum(np.arange(count) - 1, 0)
            hi = np.minimum(np.arange(count) + 1, count - 1)
            diffs = centers[hi] - centers[lo]
            angles = np.arctan2(diffs[:, 1], diffs[:, 0])
        if halfwidth is not None:
            delta = _alias_phase(patch_w // 2, halfwidth)
            normals = np.stack([-np.sin(angles), np.cos(angles)], axis=1)
            centers = centers - delta * normals

        # When the object is already straight and sitting on the pixel
        # grid, the measured frames differ from an exact integer-grid
        # copy only by estimation noise; resampling through them would
        # re-blur the image and re-quantize its contours for no gain.
        # Snap to the grid so such an input is copied pixel for pixel.
        col_t = float(np.rint(np.median(centers[:, 1])))
        row0 = float(np.rint(np.median(centers[:, 0] - arc_centers)))
        ideal_rows = row0 + arc_centers
        # The first and last patches straddle the object's tips, where
        # the cross-section is a few pixels wide and the measurements
        # above are at their noisiest, so straightness is judged on the
        # interior patches; the override still applies to every patch.
        inner = slice(1, -1) if count > 3 else slice(None)
        if (np.abs(angles[inner]).max() < 0.03
                and np.abs(centers[inner, 1] - col_t).max() < 0.35
                and np.abs(centers[inner, 0] - ideal_rows[inner]).max() < 0.8):
            # Thinning eats a pixel or two off each tip, so a grid laid
            # out from the axis alone would trim the object's first and
            # last rows on every run.  Stretch it to the thresholded
            # extent instead; a second run then reproduces its input.
            lo_c = max(int(col_t) - patch_w // 2, 0)
            hi_c = min(lo_c + patch_w, img.shape[1])
            band = img[:, lo_c:hi_c]
            mid_r = int(np.clip(ideal_rows[count // 2], 0, img.shape[0] - 1))
            mid_c = int(np.clip(col_t, 0, img.shape[1] - 1))
            dark = img[mid_r, mid_c] < center_threshold
            fg = band < center_threshold if dark else band > center_threshold
            fg_rows = np.nonzero(fg.any(axis=1))[0]
            if fg_rows.size:
                span = int(fg_rows[-1]) - int(fg_rows[0]) + 1
                if span <= (count + 2) * patch_h:
                    count = max(int(np.ceil(span / patch_h)), 1)
                    arc_centers = (np.arange(count) * patch_h
                                   + (patch_h - 1) / 2.0)
                    row0 = float(fg_rows[0])
                    ideal_rows = row0 + arc_centers
            centers = np.stack([ideal_rows, np.full(count, col_t)], axis=1)
            angles = np.zeros(count)

    # v pairs with the mid-patch centers to give integer arc positions;
    # u stays integer so a vertical axis resamples source pixels exactly.
    v = np.arange(patch_h) - (patch_h - 1) / 2.0
    u = np.arange(patch_w, dtype=np.float64) - patch_w // 2
    patches = np.empty((count, patch_h, patch_w), dtype=np.float64)
    for k in range(count):
        d = np.array([np.cos(angles[k]), np.sin(angles[k])])
        n = np.array([-d[1], d[0]])
        rows = centers[k, 0] + v[:, None] * d[0] + u[None, :] * n[0]
        cols = centers[k, 1] + v[:, None] * d[1] + u[None, :] * n[1]
        patches[k] = bilinear_sample(img, rows, cols, background)

    return PatchSequence(pixels=patches, centers=centers, angles=angles,
                         background=float(background))


def rearrange_patches(seq: PatchSequence, out_w: int) -> np.ndarray:
    """Stack patches vertically, horizontally centered on an out_w canvas."""
    count = len(seq)
    patch_h, patch_w = seq.patch_shape
    if out_w < patch_w:
        raise ValueError(f"output width {out_w} narrower than patches ({patch_w})")
    out = np.full((count * patch_h, out_w), seq.background, dtype=np.float64)
    c0 = (out_w - patch_w) // 2
    for k in range(count):
        out[k * patch_h:(k + 1) * patch_h, c0:c0 + patch_w] = seq.pixels[k]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _local_directions(points: np.ndarray) -> np.ndarray:
    """Unit tangent per point (central differences, one-sided at the ends)."""
    pts = points.astype(np.float64)
    d = np.empty_like(pts)
    d[1:-1] = pts[2:] - pts[:-2]
    d[0] = pts[1] - pts[0]
    d[-1] = pts[-1] - pts[-2]
    norms = np.hypot(d[:, 0], d[:, 1])
    norms[norms == 0] = 1.0
    return d / norms[:, None]


def ma_straighten(img: np.ndarray, mask: np.ndarray, scan_w: int | None = None,
                  extend_px: int = 30, direction_window: int = 5,
                  prune_ratio: float = 0.1) -> np.ndarray:
    """Whole-row straightening baseline.

    Thin the mask (pruning side branches when needed), push both axis
    ends outward by up to extend_px pixels along the direction of the
    last direction_window points (stopping at the mask or image edge),
    then emit one perpendicular scan line of scan_w pixels per axis
    point.  Output height equals the extended axis point count.
    """
    from .segmentation import background_mean
    from .skeleton import _principal_direction

    img = np.asarray(img)
    mask = np.asarray(mask, dtype=bool)
    skel = strip_redundant_pixels(zhang_suen_thin(mask))
    traced = trace_axis(skel)
    if isinstance(traced, BranchReport):
        traced = trace_axis(prune_branches(skel, prune_ratio))
        if not isinstance(traced, MedialAxis):
            raise SkeletonError("skeleton not reducible to a single path")
    pts = traced.points
    if len(pts) < 2:
        raise SkeletonError("axis too short to straighten")

    def extension(ordered: np.ndarray) -> list[tuple[int, int]]:
        end = ordered[-1]
        window = ordered[-direction_window:]
        ref = (end - window[0]).astype(np.float64)
        if not ref.any():
            ref = (end - ordered[-2]).astype(np.float64)
        d = _principal_direction(window, ref)
        added: list[tuple[int, int]] = []
        pos = end.astype(np.float64)
        last = tuple(end)
        while len(added) < extend_px:
            pos = pos + d
            px = (int(np.rint(pos[0])), int(np.rint(pos[1])))
            if px == last:
                continue
            if not (0 <= px[0] < mask.shape[0] and 0 <= px[1] < mask.shape[1]):
                break
            if not mask[px]:
                break
            added.append(px)
            last = px
        return added

    head = extension(pts[::-1])
    tail = extension(pts)
    full = np.concatenate([
        np.array(head[::-1], dtype=np.int64).reshape(-1, 2),
        pts,
        np.array(tail, dtype=np.int64).reshape(-1, 2),
    ])

    if scan_w is None:
        cols = np.argwhere(mask)[:, 1]
        scan_w = int(cols.max() - cols.min() + 1) + 4
    bg = background_mean(img, mask)
    dirs = _local_directions(full)
    normals = np.stack([-dirs[:, 1], dirs[:, 0]], axis=1)
    u = np.arange(scan_w, dtype=np.float64) - scan_w // 2
    rows = full[:, 0:1] + u[None, :] * normals[:, 0:1]
    cols_ = full[:, 1:2] + u[None, :] * normals[:, 1:2]
    out = bilinear_sample(img, rows, cols_, bg)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
