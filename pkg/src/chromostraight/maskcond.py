"""Cell-grid masking and per-cell curvature conditions.

The straightened canvas is divided into a grid of equal cells (two
columns, a configurable number of rows).  Training inputs hide a fixed
fraction of the cells behind Gaussian noise while keeping a thin band
around the medial axis; a companion condition image labels every cell
Blank, Straight, or Bent from its response to a horizontal-edge Sobel
kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

LABEL_BLANK = "blank"
LABEL_STRAIGHT = "straight"
LABEL_BENT = "bent"

# Rendered gray levels for condition PNGs.
LABEL_VALUES = {LABEL_BLANK: 0, LABEL_STRAIGHT: 128, LABEL_BENT: 255}

AXIS_BAND_RADIUS = 2.0

SOBEL_KERNEL = np.array([[1, 2, 1], [0, 0, 0], [-1, -2, -1]], dtype=np.float64)


@dataclass(frozen=True)
class PatchGrid:
    """Equal-cell partition of a canvas, indexed row-major."""

    rows: int
    cols: int
    cell_h: int
    cell_w: int

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    @property
    def height(self) -> int:
        return self.rows * self.cell_h

    @property
    def width(self) -> int:
        return self.cols * self.cell_w

    def cell_slice(self, index: int) -> tuple[slice, slice]:
        if not 0 <= index < self.n_cells:
            raise IndexError(f"cell index {index} out of range")
        r, c = divmod(index, self.cols)
        return (slice(r * self.cell_h, (r + 1) * self.cell_h),
                slice(c * self.cell_w, (c + 1) * self.cell_w))


def split_grid(height: int, width: int, n_rows: int, n_cols: int = 2) -> PatchGrid:
    """Partition height x width into n_rows x n_cols equal cells."""
    if n_rows < 1 or n_cols < 1:
        raise ValueError("grid must have at least one row and column")
    if height % n_rows != 0 or width % n_cols != 0:
        raise ValueError(
            f"{height}x{width} canvas not divisible into {n_rows}x{n_cols} cells")
    return PatchGrid(rows=n_rows, cols=n_cols,
                     cell_h=height // n_rows, cell_w=width // n_cols)


@dataclass(frozen=True)
class MaskSpec:
    """Which grid cells are hidden for one sample."""

    indices: tuple[int, ...]
    ratio: float
    seed: int


def sample_mask(grid: PatchGrid, ratio: float = 0.70, seed: int = 0) -> MaskSpec:
    """Draw round(ratio * n_cells) distinct cells uniformly, seeded."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"mask ratio must be in [0, 1], got {ratio}")
    k = int(round(ratio * grid.n_cells))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(grid.n_cells, size=k, replace=False)
    return MaskSpec(indices=tuple(sorted(int(i) for i in chosen)),
                    ratio=ratio, seed=seed)


def axis_distance_map(shape: tuple[int, int], axis_points: np.ndarray) -> np.ndarray:
    """Per-pixel Euclidean distance to the nearest axis point."""
    marks = np.ones(shape, dtype=bool)
    pts = np.asarray(axis_points, dtype=np.int64).reshape(-1, 2)
    marks[pts[:, 0], pts[:, 1]] = False
    return ndimage.distance_transform_edt(marks)


def apply_mask(img: np.ndarray, grid: PatchGrid, spec: MaskSpec,
               axis_points: np.ndarray, noise_mean: float,
               noise_stddev: float = 25.0, seed: int = 0) -> np.ndarray:
    """Fill the masked cells with clipped Gaussian noise.

    Cells containing at least one axis point keep the original pixels
    within AXIS_BAND_RADIUS of the axis, so the intensity profile along
    the chromosome survives masking.  Noise is drawn cell by cell in
    ascending index order, making the output a pure function of
    (img, spec, axis, noise parameters, seed).
    """
    img = np.asarray(img)
    if img.shape != (grid.height, grid.width):
        raise ValueError(
            f"image shape {img.shape} does not match grid {grid.height}x{grid.width}")
    pts = np.asarray(axis_points, dtype=np.int64).reshape(-1, 2)
    dist = axis_distance_map(img.shape, pts)
    band = dist <= AXIS_BAND_RADIUS

    cell_rows = pts[:, 0] // grid.cell_h
    cell_cols = pts[:, 1] // grid.cell_w
    axis_cells = set((cell_rows * grid.cols + cell_cols).tolist())

    rng = np.random.default_rng(seed)
    out = img.copy()
    for idx in spec.indices:
        sl = grid.cell_slice(idx)
        block = rng.normal(noise_mean, noise_stddev,
                           size=(grid.cell_h, grid.cell_w))
        block = np.clip(np.rint(block), 0, 255).astype(np.uint8)
        keep = band[sl] if idx in axis_cells else None
        if keep is not None:
            block[keep] = img[sl][keep]
        out[sl] = block
    return out


def _sobel_response(arr: np.ndarray) -> np.ndarray:
    """'same'-size response to the horizontal-edge kernel, zero padded."""
    a = np.pad(np.asarray(arr, dtype=np.float64), 1)
    return (
        (a[:-2, :-2] + 2.0 * a[:-2, 1:-1] + a[:-2, 2:])
        - (a[2:, :-2] + 2.0 * a[2:, 1:-1] + a[2:, 2:])
    )


def condition_patch(bin_patch: np.ndarray) -> float:
    """Summed absolute Sobel response of one binary patch.

    The patch is its own convolution domain (zero padding at its
    borders).  A signed sum would cancel on symmetric bends, so the
    absolute response is accumulated.
    """
    p = np.asarray(bin_patch)
    vals = np.unique(p)
    if not np.isin(vals, (0, 1)).all():
        raise ValueError("condition patches must be binary with values {0, 1}")
    return float(np.abs(_sobel_response(p)).sum())


@dataclass(frozen=True)
class ConditionGrid:
    """Per-cell curvature labels plus the raw responses behind them."""

    grid: PatchGrid
    labels: tuple[str, ...]
    responses: tuple[float, ...]

    @property
    def bent_cells(self) -> tuple[int, ...]:
        return tuple(i for i, lab in enumerate(self.labels) if lab == LABEL_BENT)


def condition_image(bin_img: np.ndarray, grid: PatchGrid,
                    threshold_t: float = 18.0) -> ConditionGrid:
    """Label every cell Blank / Straight / Bent.

    The Sobel response is taken over the whole binary image (zero
    padding only at the image border) and accumulated per cell, so a
    straight chromosome crossing cell seams does not register as bent
    there.  Cells without foreground are Blank regardless of response
    bleeding in from neighboring cells.
    """
    b = np.asarray(bin_img).astype(np.uint8)
    if b.shape != (grid.height, grid.width):
        raise ValueError(
            f"image shape {b.shape} does not match grid {grid.height}x{grid.width}")
    resp = np.abs(_sobel_response(b))
    labels = []
    responses = []
    for idx in range(grid.n_cells):
        sl = grid.cell_slice(idx)
        g = float(resp[sl].sum())
        responses.append(g)
        if not b[sl].any():
            labels.append(LABEL_BLANK)
        elif g >= threshold_t:
            labels.append(LABEL_BENT)
        else:
            labels.append(LABEL_STRAIGHT)
    return ConditionGrid(grid=grid, labels=tuple(labels),
                         responses=tuple(responses))


def render_condition(cond: ConditionGrid) -> np.ndarray:
    """Paint the condition labels as a {0, 128, 255} grayscale image."""
    out = np.zeros((cond.grid.height, cond.grid.width), dtype=np.uint8)
    for idx, label in enumerate(cond.labels):
        out[cond.grid.cell_slice(idx)] = LABEL_VALUES[label]
    return out


def inference_condition(grid: PatchGrid, bent_cells: tuple[int, ...]
                        ) -> tuple[ConditionGrid, MaskSpec]:
    """Condition and mask choice used when reconstructing a new image.

    Every cell is labeled Straight (the target appearance) and exactly
    the reported bent cells are masked for resynthesis.
    """
    bent = tuple(sorted(set(int(i) for i in bent_cells)))
    for i in bent:
        if not 0 <= i < grid.n_cells:
            raise IndexError(f"bent cell {i} out of range")
    cond = ConditionGrid(grid=grid,
                         labels=tuple([LABEL_STRAIGHT] * grid.n_cells),
                         responses=tuple([0.0] * grid.n_cells))
    spec = MaskSpec(indices=bent, ratio=len(bent) / grid.n_cells, seed=0)
    return cond, spec
