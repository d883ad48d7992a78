#!/usr/bin/env python3
"""Builds the checked-in test fixtures with the preprocessing toolkit.

Dev-time helper: the TypeScript package never calls Python at runtime,
it only reads the directories this script writes.

  bundle50/  training bundle of straight banded bars, every sample in
             the train split, produced by the fixtures -> preprocess ->
             prepare chain
  benteval/  bent/source canvas pairs derived from bundle50 samples,
             with per-pair bent cells and the source medial axis, for
             exercising the straightening composite

Run from the straightnet directory with the chromostraight package
installed:

    python3 tools/make_fixtures.py
"""
import argparse
import json
import os
import shutil
import subprocess
import tempfile

import numpy as np

from chromostraight.imageio import load_image, save_image
from chromostraight.maskcond import LABEL_BENT, condition_image, split_grid
from chromostraight.metrics import density_profile, dp_score, sobel_score
from chromostraight.segmentation import SegmentationError, segment
from chromostraight.skeleton import MedialAxis
from chromostraight.synthbend import BendError, generate_bent, sample_bend_spec

TRIALS_PER_SAMPLE = 40
# a bend that leaves the source-axis density profile this flat cannot
# show recovery, so such draws are rejected as uninformative
MIN_DP_DAMAGE = 0.5


def run(args):
    subprocess.run(args, check=True)


def bend_onto_canvas(img, mask, axis, grid, seed0):
    """Bend a straight canvas and crop back to canvas size.

    Retries seeds until the bent shape stays inside the canvas, at
    least one cell reads as bent, the edge response clearly grew, and
    the density profile along the source axis took visible damage.
    Returns (bent, bent_cells, dp_damage, trial_seed) or None.
    """
    h, w = img.shape
    src_sobel = sobel_score(mask)
    src_profile = density_profile(img, axis)
    for trial in range(TRIALS_PER_SAMPLE):
        seed = seed0 + trial
        try:
            warped = generate_bent(img, mask, sample_bend_spec(seed))
        except BendError:
            continue
        pad = (warped.shape[0] - h) // 2
        bent = warped[pad:pad + h, pad:pad + w]
        try:
            bmask = segment(bent)
        except SegmentationError:
            continue
        if bmask[0, :].any() or bmask[-1, :].any() \
                or bmask[:, 0].any() or bmask[:, -1].any():
            continue
        if bmask.sum() < 0.8 * mask.sum():
            continue
        cond = condition_image(bmask, grid)
        cells = [i for i, lab in enumerate(cond.labels) if lab == LABEL_BENT]
        if not cells:
            continue
        if sobel_score(bmask) < src_sobel + 0.1:
            continue
        dp_bent = dp_score(src_profile, density_profile(bent, axis))
        if dp_bent < MIN_DP_DAMAGE:
            continue
        return bent, cells, dp_bent, seed
    return None


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(here, "..", "test", "fixtures"))
    ap.add_argument("--seed", type=int, default=101)
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--eval-count", type=int, default=8)
    args = ap.parse_args()

    out = os.path.abspath(args.out)
    bundle_dir = os.path.join(out, "bundle50")
    eval_dir = os.path.join(out, "benteval")
    for d in (bundle_dir, eval_dir):
        shutil.rmtree(d, ignore_errors=True)
    os.makedirs(eval_dir)

    with tempfile.TemporaryDirectory() as tmp:
        fx = os.path.join(tmp, "fx")
        pre = os.path.join(tmp, "pre")
        run(["chromostraight", "fixtures", "--out", fx,
             "--count", str(args.count), "--seed", str(args.seed)])
        run(["chromostraight", "preprocess", "--out", pre,
             "--manifest", os.path.join(fx, "manifest.json"),
             "--seed", str(args.seed)])
        run(["chromostraight", "prepare", "--out", bundle_dir,
             "--manifest", os.path.join(pre, "manifest.json"),
             "--seed", str(args.seed)])

    man_path = os.path.join(bundle_dir, "manifest.json")
    with open(man_path) as fh:
        man = json.load(fh)
    for rec in man["samples"]:
        rec["split"] = "train"
    with open(man_path, "w") as fh:
        json.dump(man, fh, indent=2)
    print(f"bundle50: {len(man['samples'])} train samples")

    grid = split_grid(man["canvas"][0], man["canvas"][1], man["grid_rows"])
    entries = []
    for rec in man["samples"]:
        if len(entries) >= args.eval_count:
            break
        img = load_image(os.path.join(bundle_dir, rec["image_path"]))
        mask = segment(img)
        axis = MedialAxis(points=np.asarray(rec["axis"], dtype=np.int64))
        made = bend_onto_canvas(img, mask, axis, grid,
                                seed0=args.seed * 1000 + len(entries) * 100)
        if made is None:
            continue
        bent, cells, dp_bent, seed = made
        save_image(img, os.path.join(eval_dir, f"{rec['id']}_source.png"))
        save_image(bent, os.path.join(eval_dir, f"{rec['id']}_bent.png"))
        entries.append({
            "id": rec["id"],
            "source": f"{rec['id']}_source.png",
            "bent": f"{rec['id']}_bent.png",
            "bent_cells": cells,
            "axis": rec["axis"],
            "bend_seed": seed,
            "sobel_source": sobel_score(mask),
            "sobel_bent": sobel_score(segment(bent)),
            "dp_bent": dp_bent,
        })
        print(f"benteval {rec['id']}: cells={cells} "
              f"sobel {entries[-1]['sobel_source']:.2f}->"
              f"{entries[-1]['sobel_bent']:.2f} dp={dp_bent:.3f}")
    if len(entries) < args.eval_count:
        raise SystemExit(
            f"only {len(entries)} usable bent pairs of {args.eval_count}")
    with open(os.path.join(eval_dir, "eval.json"), "w") as fh:
        json.dump(entries, fh, indent=2)
    print(f"benteval: {len(entries)} pairs")


if __name__ == "__main__":
    main()
