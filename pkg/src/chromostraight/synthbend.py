"""Synthetic bending of straight chromosomes.

Bent training data is produced by laterally displacing a straight
chromosome around one to three control points spread along its axis.
Displacement falls off as a cosine bump around each control point, so
the warp is smooth, keeps the banding order, and leaves arc length
nearly unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import ma_score
from .segmentation import background_mean
from .skeleton import mask_axis
from .straighten import bilinear_sample

MIN_SEPARATION = 0.15
FACTOR_RANGE = (1.05, 1.35)
CONTROL_POINT_CHOICES = (1, 2, 3)
# Lateral displacement amplitude = (factor - 1) * local half-width * scale.
DISPLACEMENT_SCALE = 2.0
# Arc-fraction radius over which one control point influences the axis.
FALLOFF_RADIUS = 0.3
STRAIGHT_SOURCE_MIN = 95.0


@dataclass(frozen=True)
class BendSpec:
    """Where and how strongly to bend, plus the seed that made it."""

    control_points: tuple[float, ...]
    factors: tuple[float, ...]
    seed: int

    def __post_init__(self):
        if len(self.control_points) != len(self.factors):
            raise ValueError("control points and factors must pair up")
        if not self.control_points:
            raise ValueError("need at least one control point")
        for t in self.control_points:
            if not 0.0 < t < 1.0:
                raise ValueError(f"control point {t} outside (0, 1)")


def sample_bend_spec(seed: int) -> BendSpec:
    """Draw a bend: 1-3 control points (separated by at least
    MIN_SEPARATION in arc fraction) with factors in FACTOR_RANGE."""
    rng = np.random.default_rng(seed)
    count = int(rng.integers(CONTROL_POINT_CHOICES[0],
                             CONTROL_POINT_CHOICES[-1] + 1))
    while True:
        points = np.sort(rng.uniform(0.0, 1.0, size=count))
        if points[0] <= 0.0:
            continue
        if count == 1 or float(np.diff(points).min()) >= MIN_SEPARATION:
            break
    factors = rng.uniform(*FACTOR_RANGE, size=count)
    return BendSpec(control_points=tuple(float(t) for t in points),
                    factors=tuple(float(f) for f in factors),
                    seed=int(seed))


def _half_width(mask: np.ndarray, point: np.ndarray, normal: np.ndarray) -> float:
    """Half the mask thickness at an axis point, measured along the normal."""
    h, w = mask.shape

    def run(direction: np.ndarray) -> int:
        steps = 0
        pos = point.astype(np.float64)
        for _ in range(max(h, w)):
            pos = pos + direction
            r, c = int(np.rint(pos[0])), int(np.rint(pos[1]))
            if not (0 <= r < h and 0 <= c < w) or not mask[r, c]:
                break
            steps += 1
        return steps

    return (run(normal) + run(-normal)) / 2.0


class BendError(ValueError):
    """Raised when an image cannot be bent as requested."""


def generate_bent(img: np.ndarray, mask: np.ndarray, spec: BendSpec) -> np.ndarray:
    """Warp a straight chromosome according to the bend spec.

    The whole cross-section at each arc position shifts rigidly along
    the source normal, so bands never reorder; the output canvas is
    padded far enough that the bent shape always fits.  Deterministic
    for a fixed (img, spec): displacement signs come from spec.seed.
    """
    img = np.asarray(img)
    mask = np.asarray(mask, dtype=bool)
    axis = mask_axis(mask)
    straightness = ma_score(axis)
    if straightness < STRAIGHT_SOURCE_MIN:
        raise BendError(
            f"source axis straightness {straightness:.1f} below "
            f"{STRAIGHT_SOURCE_MIN}; refusing to bend a bent chromosome")

    a0 = axis.points[0].astype(np.float64)
    a1 = axis.points[-1].astype(np.float64)
    chord = a1 - a0
    length = float(np.hypot(*chord))
    if length == 0:
        raise BendError("axis endpoints coincide")
    ahat = chord / length
    nhat = np.array([-ahat[1], ahat[0]])

    rng = np.random.default_rng([spec.seed, 1])
    signs = rng.choice((-1.0, 1.0), size=len(spec.control_points))

    pts = axis.points.astype(np.float64)
    amplitudes = []
    for t, factor, sign in zip(spec.control_points, spec.factors, signs):
        anchor = pts[int(round(t * (len(pts) - 1)))]
        hw = _half_width(mask, anchor, nhat)
        amplitudes.append(sign * (factor - 1.0) * hw * DISPLACEMENT_SCALE)

    def displacement(t: np.ndarray) -> np.ndarray:
        d = np.zeros_like(t)
        for tj, amp in zip(spec.control_points, amplitudes):
            u = (t - tj) / FALLOFF_RADIUS
            inside = np.abs(u) < 1.0
            d += np.where(inside, amp * 0.5 * (1.0 + np.cos(np.pi * u)), 0.0)
        return d

    probe = displacement(np.linspace(0.0, 1.0, 512))
    pad = int(np.ceil(np.abs(probe).max())) + 2
    bg = background_mean(img, mask)

    h, w = img.shape
    rows, cols = np.indices((h + 2 * pad, w + 2 * pad), dtype=np.float64)
    rows -= pad
    cols -= pad
    t = ((rows - a0[0]) * ahat[0] + (cols - a0[1]) * ahat[1]) / length
    t = np.clip(t, 0.0, 1.0)
    d = displacement(t)
    # The shift is normal to the axis, so arc position is unchanged by
    # it and the inverse map is exact: source = target - d * nhat.
    src_r = rows - d * nhat[0]
    src_c = cols - d * nhat[1]
    out = bilinear_sample(img, src_r, src_c, fill=bg)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
