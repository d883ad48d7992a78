"""Straightening quality scores.

All scores are scaled to percentages.  Length preservation compares
axis pixel counts; axis straightness averages local slope deviations
over equal arc-length segments; the Sobel score accumulates
horizontal-edge response of the binary shape; the density-profile
score compares projected intensity along the axis before and after
straightening.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .maskcond import PatchGrid, _sobel_response
from .skeleton import MedialAxis
from .straighten import bilinear_sample

CSV_HEADER = ("id", "l_score", "ma_score", "sobel_score", "dp_score", "lpips")


def l_score(pred_len: int | MedialAxis, target_len: int) -> float:
    """Length preservation: (1 - |l - l'| / l') * 100."""
    if isinstance(pred_len, MedialAxis):
        pred_len = len(pred_len)
    if target_len < 1:
        raise ValueError("target length must be at least 1 pixel")
    if pred_len < 0:
        raise ValueError("predicted length must be non-negative")
    return (1.0 - abs(pred_len - target_len) / target_len) * 100.0


def ma_score(axis: MedialAxis, n_segments: int = 6) -> float:
    """Straightness from slope deviations over n equal arc segments.

    Sample n+1 points uniformly by arc length; the score is
    (1 - mean |segment slope - end-to-end slope|) * 100.  Slopes are
    measured against the dominant direction (column change per row for
    near-vertical axes), so an upright axis scores without dividing by
    zero.
    """
    if n_segments < 1:
        raise ValueError("need at least one segment")
    pts = axis.points.astype(np.float64)
    if len(pts) < n_segments + 1:
        raise ValueError(
            f"axis has {len(pts)} points, need at least {n_segments + 1}")
    steps = np.hypot(*np.diff(pts, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    if cum[-1] == 0:
        raise ValueError("axis has zero length")
    targets = np.linspace(0.0, cum[-1], n_segments + 1)
    sr = np.interp(targets, cum, pts[:, 0])
    sc = np.interp(targets, cum, pts[:, 1])

    total_r = sr[-1] - sr[0]
    total_c = sc[-1] - sc[0]
    dr = np.diff(sr)
    dc = np.diff(sc)
    if abs(total_r) >= abs(total_c):
        slopes = dc / dr
        overall = total_c / total_r
    else:
        slopes = dr / dc
        overall = total_r / total_c
    return (1.0 - float(np.mean(np.abs(slopes - overall)))) * 100.0


def sobel_score(bin_img: np.ndarray, grid: PatchGrid | None = None,
                lam: float = 0.01) -> float:
    """lam times the summed absolute Sobel response over all cells.

    The cells tile the image, so the total equals the whole-image
    response; the grid argument just validates the tiling when given.
    """
    b = np.asarray(bin_img).astype(np.uint8)
    if grid is not None and b.shape != (grid.height, grid.width):
        raise ValueError(
            f"image shape {b.shape} does not match grid {grid.height}x{grid.width}")
    return lam * float(np.abs(_sobel_response(b)).sum())


def density_profile(img: np.ndarray, axis: MedialAxis) -> np.ndarray:
    """Intensity sampled at each axis point, in axis order."""
    pts = axis.points
    if len(pts) == 0:
        raise ValueError("empty axis")
    return bilinear_sample(np.asarray(img), pts[:, 0].astype(np.float64),
                           pts[:, 1].astype(np.float64), fill=0.0)


def dp_score(profile_a: np.ndarray, profile_b: np.ndarray) -> float:
    """Mean squared difference of normalized profiles, times 100.

    The second profile is linearly resampled to the first one's length;
    both are scaled by 1/255 before comparison.
    """
    a = np.asarray(profile_a, dtype=np.float64)
    b = np.asarray(profile_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("profiles must be non-empty")
    if b.size != a.size:
        pos = np.linspace(0.0, 1.0, a.size)
        src = np.linspace(0.0, 1.0, b.size)
        b = np.interp(pos, src, b)
    diff = (a - b) / 255.0
    return float(np.mean(diff ** 2) * 100.0)


def classification_metrics(confusion: np.ndarray) -> dict[str, float]:
    """Macro-averaged accuracy, recall, precision, and F1.

    Rows are true classes, columns predictions.  Per-class terms with a
    zero denominator contribute zero; F1 combines the macro precision
    and recall.
    """
    cm = np.asarray(confusion, dtype=np.float64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {cm.shape}")
    if (cm < 0).any():
        raise ValueError("confusion matrix counts must be non-negative")
    total = cm.sum()
    if total == 0:
        raise ValueError("confusion matrix is empty")

    tp = np.diag(cm)
    fn = cm.sum(axis=1) - tp
    fp = cm.sum(axis=0) - tp
    tn = total - tp - fn - fp

    def safe_mean(num, den):
        den = np.asarray(den)
        out = np.divide(num, den, out=np.zeros_like(np.asarray(num, dtype=float)),
                        where=den > 0)
        return float(out.mean())

    accuracy = safe_mean(tp + tn, np.full_like(tp, total))
    recall = safe_mean(tp, tp + fn)
    precision = safe_mean(tp, tp + fp)
    f1 = 0.0
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    return {"accuracy": accuracy, "recall": recall,
            "precision": precision, "f1": f1}


@dataclass
class ScoreReport:
    """One evaluated pair; lpips stays None unless a perceptual model ran."""

    id: str
    l_score: float
    ma_score: float
    sobel_score: float
    dp_score: float
    lpips: float | None = None
    method: str = "ppa"

    def csv_row(self) -> list[str]:
        row = [self.id]
        for value in (self.l_score, self.ma_score, self.sobel_score,
                      self.dp_score):
            row.append(f"{value:.4f}")
        row.append("" if self.lpips is None else f"{self.lpips:.4f}")
        return row


def write_scores_csv(reports: list[ScoreReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rep in reports:
            writer.writerow(rep.csv_row())
