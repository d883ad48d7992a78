"""Batch drivers: straighten, bend, training prep, and scoring.

Each driver walks a manifest sample by sample, isolating per-sample
failures so one bad crop cannot sink a dataset run.  Scoring writes a
CSV plus rendered figures of the score distributions.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from PIL import Image
from scipy import ndimage

from .imageio import histogram, load_image, save_image, smooth_histogram
from .manifest import RunConfig, SampleRecord, assign_folds, sample_seed, save_manifest
from .maskcond import apply_mask, condition_image, render_condition, sample_mask, split_grid
from .metrics import (
    ScoreReport,
    density_profile,
    dp_score,
    l_score,
    ma_score,
    sobel_score,
    write_scores_csv,
)
from .segmentation import background_mean, otsu_threshold, segment
from .skeleton import mask_axis
from .straighten import extract_patches, rearrange_patches
from .synthbend import generate_bent, sample_bend_spec


class SampleError(RuntimeError):
    """A per-sample failure, tagged with the sample id."""

    def __init__(self, sample_id: str, cause: Exception):
        super().__init__(f"{sample_id}: {cause}")
        self.sample_id = sample_id
        self.cause = cause


def place_on_canvas(stack: np.ndarray, canvas_h: int, canvas_w: int,
                    fill: float) -> np.ndarray:
    """Center a patch stack on a fixed canvas."""
    h, w = stack.shape
    if h > canvas_h or w > canvas_w:
        raise ValueError(
            f"straightened stack {h}x{w} exceeds the {canvas_h}x{canvas_w} canvas")
    out = np.full((canvas_h, canvas_w),
                  int(np.clip(np.rint(fill), 0, 255)), dtype=np.uint8)
    top = (canvas_h - h) // 2
    left = (canvas_w - w) // 2
    out[top:top + h, left:left + w] = stack
    return out


def straighten_sample(img: np.ndarray, cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    """Full single-image chain; returns (canvas image, its new axis)."""
    mask = segment(img)
    axis = mask_axis(mask, prune_ratio=cfg.prune_ratio,
                     gap_threshold=cfg.gap_threshold)
    bg = background_mean(img, mask)
    t = otsu_threshold(smooth_histogram(histogram(img)))
    seq = extract_patches(img, axis, cfg.patch_h, cfg.patch_w, background=bg,
                          center_threshold=float(t))
    stack = rearrange_patches(seq, cfg.canvas_w)
    canvas = place_on_canvas(stack, cfg.canvas_h, cfg.canvas_w, bg)
    out_axis = mask_axis(segment(canvas), prune_ratio=cfg.prune_ratio,
                         gap_threshold=cfg.gap_threshold)
    return canvas, out_axis.points


def _measure(img: np.ndarray, cfg: RunConfig) -> tuple[float, float]:
    """(axis arc length, max thickness) used for the dataset-level scale."""
    mask = segment(img)
    axis = mask_axis(mask, prune_ratio=cfg.prune_ratio,
                     gap_threshold=cfg.gap_threshold)
    thickness = 2.0 * float(ndimage.distance_transform_edt(mask).max())
    return axis.arc_length, thickness


def dataset_scale(lengths: list[float], widths: list[float], cfg: RunConfig) -> float:
    """One rescale ratio so the longest/widest chromosome fits the canvas."""
    if not lengths:
        raise ValueError("no measurable samples")
    s_len = (cfg.canvas_h - cfg.patch_h) / max(lengths)
    s_wid = cfg.patch_w / max(widths)
    # Shrink-only: a dataset that already fits is left at native
    # resolution instead of being blurred up to fill the canvas.
    return min(1.0, s_len, s_wid)


def _rescale(img: np.ndarray, scale: float) -> np.ndarray:
    if scale == 1.0:
        return img
    h, w = img.shape
    new_w = max(1, int(round(w * scale)))
    new_h = max(1, int(round(h * scale)))
    resized = Image.fromarray(img, mode="L").resize((new_w, new_h),
                                                    Image.BILINEAR)
    return np.asarray(resized, dtype=np.uint8)


def _run_pool(items, worker, n_workers: int, keep_going: bool):
    """Apply worker(item) over items; returns (results, failures).

    Results keep manifest order; randomness is pre-derived per sample,
    so the pool size never changes any output.
    """
    results = {}
    failures = {}

    def guarded(item):
        try:
            return item.id, worker(item), None
        except Exception as exc:   # noqa: BLE001 - isolation boundary
            return item.id, None, exc

    if n_workers <= 1:
        outcomes = [guarded(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            outcomes = list(pool.map(guarded, items))

    for sample_id, value, exc in outcomes:
        if exc is not None:
            if not keep_going:
                raise SampleError(sample_id, exc) from exc
            failures[sample_id] = f"{type(exc).__name__}: {exc}"
        else:
            results[sample_id] = value
    return results, failures


def preprocess_batch(records: list[SampleRecord], cfg: RunConfig,
                     manifest_dir: str, out_dir: str, keep_going: bool = False,
                     ) -> tuple[list[SampleRecord], dict, float]:
    """Straighten every sample onto the canvas.

    First pass measures each chromosome; the largest one pins a single
    dataset-wide rescale ratio.  Second pass rescales, straightens, and
    writes <id>.png plus the refreshed axis into the output manifest.
    """
    os.makedirs(out_dir, exist_ok=True)

    def load(rec: SampleRecord) -> np.ndarray:
        return load_image(os.path.join(manifest_dir, rec.image_path))

    measured, failures = _run_pool(
        records, lambda rec: _measure(load(rec), cfg), cfg.workers, keep_going)
    if not measured:
        raise ValueError("no sample survived measurement; nothing to scale")
    scale = dataset_scale([m[0] for m in measured.values()],
                          [m[1] for m in measured.values()], cfg)

    def process(rec: SampleRecord) -> SampleRecord:
        img = _rescale(load(rec), scale)
        canvas, axis_points = straighten_sample(img, cfg)
        filename = f"{rec.id}.png"
        save_image(canvas, os.path.join(out_dir, filename))
        return SampleRecord(
            id=rec.id, image_path=filename, split=rec.split,
            group_id=rec.group, kind=rec.kind,
            axis=[[int(r), int(c)] for r, c in axis_points], seed=rec.seed)

    todo = [rec for rec in records if rec.id in measured]
    results, more_failures = _run_pool(todo, process, cfg.workers, keep_going)
    failures.update(more_failures)
    ordered = [results[rec.id] for rec in todo if rec.id in results]
    save_manifest(ordered, os.path.join(out_dir, "manifest.json"),
                  extra={"canvas": [cfg.canvas_h, cfg.canvas_w],
                         "scale": scale})
    return ordered, failures, scale


def synth_batch(records: list[SampleRecord], cfg: RunConfig, manifest_dir: str,
                out_dir: str, keep_going: bool = False,
                ) -> tuple[list[SampleRecord], dict]:
    """Generate bent variants of every straight source sample.

    Each source yields cfg.synth_variants outputs named <id>-b<k>,
    grouped with their source so later splits keep them together.
    Source images are copied alongside so the output manifest is
    self-contained.
    """
    os.makedirs(out_dir, exist_ok=True)
    out_records = []
    failures = {}
    for rec in records:
        if rec.kind != "real":
            continue
        try:
            img = load_image(os.path.join(manifest_dir, rec.image_path))
            mask = segment(img)
            source_name = f"{rec.id}.png"
            save_image(img, os.path.join(out_dir, source_name))
            out_records.append(SampleRecord(
                id=rec.id, image_path=source_name, group_id=rec.group,
                kind="real", seed=rec.seed))
            for k in range(cfg.synth_variants):
                seed = sample_seed(cfg.seed, rec.id, f"bend{k}")
                spec = sample_bend_spec(seed)
                bent = generate_bent(img, mask, spec)
                bent_id = f"{rec.id}-b{k}"
                filename = f"{bent_id}.png"
                save_image(bent, os.path.join(out_dir, filename))
                out_records.append(SampleRecord(
                    id=bent_id, image_path=filename, group_id=rec.group,
                    kind="synthetic", seed=seed))
        except Exception as exc:   # noqa: BLE001 - isolation boundary
            if not keep_going:
                raise SampleError(rec.id, exc) from exc
            failures[rec.id] = f"{type(exc).__name__}: {exc}"
    save_manifest(out_records, os.path.join(out_dir, "manifest.json"))
    return out_records, failures


def prepare_batch(records: list[SampleRecord], cfg: RunConfig, manifest_dir: str,
                  out_dir: str, keep_going: bool = False, n_folds: int = 5,
                  val_fold: int = 0) -> tuple[list[SampleRecord], dict]:
    """Build the training bundle: original / masked / condition trios.

    Expects canvas-sized straightened inputs.  Fold assignment is
    group-aware; the chosen validation fold becomes split "val" and the
    rest "train".
    """
    os.makedirs(out_dir, exist_ok=True)
    grid = split_grid(cfg.canvas_h, cfg.canvas_w, cfg.grid_rows)
    folds = assign_folds(records, n_folds=n_folds, seed=cfg.seed)

    def process(rec: SampleRecord) -> SampleRecord:
        img = load_image(os.path.join(manifest_dir, rec.image_path))
        if img.shape != (cfg.canvas_h, cfg.canvas_w):
            raise ValueError(
                f"expected a {cfg.canvas_h}x{cfg.canvas_w} straightened "
                f"input, got {img.shape}")
        mask = segment(img)
        bg = background_mean(img, mask)
        if rec.axis:
            axis_points = np.asarray(rec.axis, dtype=np.int64)
        else:
            axis_points = mask_axis(mask, prune_ratio=cfg.prune_ratio,
                                    gap_threshold=cfg.gap_threshold).points
        cond = condition_image(mask, grid, cfg.threshold_t)
        mask_seed = sample_seed(cfg.seed, rec.id, "mask")
        spec = sample_mask(grid, cfg.mask_ratio, seed=mask_seed)
        masked = apply_mask(img, grid, spec, axis_points, noise_mean=bg,
                            noise_stddev=cfg.noise_stddev,
                            seed=sample_seed(cfg.seed, rec.id, "noise"))
        save_image(img, os.path.join(out_dir, f"{rec.id}_original.png"))
        save_image(masked, os.path.join(out_dir, f"{rec.id}_masked.png"))
        save_image(render_condition(cond),
                   os.path.join(out_dir, f"{rec.id}_condition.png"))
        fold = folds[rec.group]
        return SampleRecord(
            id=rec.id, image_path=f"{rec.id}_original.png",
            split=("val" if fold == val_fold else "train"),
            group_id=rec.group, kind=rec.kind,
            axis=[[int(r), int(c)] for r, c in axis_points],
            mask_indices=list(spec.indices), seed=mask_seed, fold=fold)

    results, failures = _run_pool(records, process, cfg.workers, keep_going)
    ordered = [results[rec.id] for rec in records if rec.id in results]
    save_manifest(ordered, os.path.join(out_dir, "manifest.json"),
                  extra={"canvas": [cfg.canvas_h, cfg.canvas_w],
                         "grid_rows": cfg.grid_rows,
                         "mask_ratio": cfg.mask_ratio,
                         "threshold_t": cfg.threshold_t})
    return ordered, failures


def load_pairs(path: str | os.PathLike) -> list[dict]:
    with open(path) as fh:
        data = json.load(fh)
    pairs = data if isinstance(data, list) else data.get("pairs", [])
    for pair in pairs:
        for key in ("id", "input", "output"):
            if key not in pair:
                raise ValueError(f"pair entry missing {key!r}: {pair}")
    return pairs


def evaluate_pairs(pairs: list[dict], cfg: RunConfig, pairs_dir: str,
                   out_dir: str, keep_going: bool = False,
                   ) -> tuple[list[ScoreReport], dict]:
    """Score straightened outputs against their bent inputs.

    Writes scores.csv, a per-method summary.csv, and score-distribution
    figures under <out>/figures/.
    """
    os.makedirs(out_dir, exist_ok=True)
    reports = []
    failures = {}
    for pair in pairs:
        try:
            in_img = load_image(os.path.join(pairs_dir, pair["input"]))
            out_img = load_image(os.path.join(pairs_dir, pair["output"]))
            in_mask = segment(in_img)
            out_mask = segment(out_img)
            in_axis = mask_axis(in_mask, prune_ratio=cfg.prune_ratio,
                                gap_threshold=cfg.gap_threshold)
            out_axis = mask_axis(out_mask, prune_ratio=cfg.prune_ratio,
                                 gap_threshold=cfg.gap_threshold)
            reports.append(ScoreReport(
                id=pair["id"],
                l_score=l_score(len(out_axis), len(in_axis)),
                ma_score=ma_score(out_axis),
                sobel_score=sobel_score(out_mask),
                dp_score=dp_score(density_profile(in_img, in_axis),
                                  density_profile(out_img, out_axis)),
                method=pair.get("method", "ppa")))
        except Exception as exc:   # noqa: BLE001 - isolation boundary
            if not keep_going:
                raise SampleError(pair.get("id", "?"), exc) from exc
            failures[pair.get("id", "?")] = f"{type(exc).__name__}: {exc}"

    write_scores_csv(reports, os.path.join(out_dir, "scores.csv"))
    _write_summary(reports, os.path.join(out_dir, "summary.csv"))
    _render_score_figures(reports, os.path.join(out_dir, "figures"))
    return reports, failures


_METRICS = ("l_score", "ma_score", "sobel_score", "dp_score")


def _write_summary(reports: list[ScoreReport], path: str) -> None:
    import csv

    methods = sorted({rep.method for rep in reports})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "metric", "mean", "std", "count"])
        for method in methods:
            subset = [rep for rep in reports if rep.method == method]
            for metric in _METRICS:
                values = np.array([getattr(rep, metric) for rep in subset])
                writer.writerow([method, metric, f"{values.mean():.4f}",
                                 f"{values.std():.4f}", len(values)])


def _render_score_figures(reports: list[ScoreReport], fig_dir: str) -> None:
    os.makedirs(fig_dir, exist_ok=True)
    if not reports:
        return
    methods = sorted({rep.method for rep in reports})

    fig, axes = plt.subplots(2, 2, figsize=(9, 7))
    for ax, metric in zip(axes.ravel(), _METRICS):
        for method in methods:
            values = [getattr(rep, metric) for rep in reports
                      if rep.method == method]
            ax.hist(values, bins=20, alpha=0.7, label=method)
        ax.set_title(metric)
        ax.set_ylabel("pairs")
        if len(methods) > 1:
            ax.legend(fontsize=8)
    fig.suptitle("Score distributions")
    fig.tight_layout()
    fig.savefig(os.path.join(fig_dir, "score_distributions.png"), dpi=120)
    plt.close(fig)

    fig, axes = plt.subplots(1, len(_METRICS), figsize=(3 * len(_METRICS), 4))
    for ax, metric in zip(np.atleast_1d(axes), _METRICS):
        data = [[getattr(rep, metric) for rep in reports
                 if rep.method == method] for method in methods]
        ax.boxplot(data, tick_labels=methods)
        ax.set_title(metric)
    fig.suptitle("Scores by method")
    fig.tight_layout()
    fig.savefig(os.path.join(fig_dir, "score_by_method.png"), dpi=120)
    plt.close(fig)
