"""End-to-end acceptance gates for the straightening toolkit.

Each test pins the contract the package ships under: thinning and
thresholding against independently written references, exact metric
anchor values, fixture-level straightening quality, the masking
contract, and fold integrity.  Runtime ceilings are asserted where the
contract includes one.
"""

import time

import numpy as np

from chromostraight.fixtures import striped_bar
from chromostraight.manifest import RunConfig, SampleRecord, assign_folds
from chromostraight.maskcond import (
    AXIS_BAND_RADIUS,
    apply_mask,
    axis_distance_map,
    sample_mask,
    split_grid,
)
from chromostraight.metrics import (
    classification_metrics,
    dp_score,
    l_score,
    ma_score,
    sobel_score,
)
from chromostraight.pipeline import _measure, _rescale, dataset_scale, straighten_sample
from chromostraight.segmentation import otsu_threshold, segment
from chromostraight.skeleton import MedialAxis, mask_axis, zhang_suen_thin
from chromostraight.synthbend import generate_bent, sample_bend_spec

from .reference import otsu_scan_batch, thin_reference


def test_thinning_matches_reference_on_random_masks():
    start = time.monotonic()
    for seed in range(50):
        rng = np.random.default_rng(seed)
        mask = rng.random((32, 32)) < 0.45
        thinned = zhang_suen_thin(mask)
        assert np.array_equal(thinned, thin_reference(mask)), seed
        assert np.array_equal(zhang_suen_thin(thinned), thinned), seed
    assert time.monotonic() - start < 5.0


def _random_histograms(count):
    rng = np.random.default_rng(0)
    hists = []
    for _ in range(count):
        h = np.zeros(256, dtype=np.int64)
        for _ in range(int(rng.integers(2, 5))):
            lo = int(rng.integers(0, 250))
            hi = int(rng.integers(lo + 1, 256))
            h[lo:hi] += rng.integers(0, 50, size=hi - lo)
        if np.count_nonzero(h) < 2:
            h[10] += 5
            h[200] += 5
        hists.append(h)
    return np.stack(hists)


def test_otsu_matches_exhaustive_scan_on_random_histograms():
    hists = _random_histograms(1000)
    expected = otsu_scan_batch(hists)
    start = time.monotonic()
    got = np.array([otsu_threshold(h) for h in hists])
    elapsed = time.monotonic() - start
    assert np.array_equal(got, expected)
    assert elapsed < 1.0


def test_metric_anchor_values_are_exact():
    assert l_score(120, 120) == 100.0
    collinear = MedialAxis(
        points=np.stack([np.arange(40), np.full(40, 7)], axis=1))
    assert ma_score(collinear) == 100.0
    profile = np.linspace(10.0, 200.0, 64)
    assert dp_score(profile, profile) == 0.0
    scores = classification_metrics(np.diag([4, 7, 2, 9]))
    assert scores == {"accuracy": 1.0, "recall": 1.0,
                      "precision": 1.0, "f1": 1.0}
    assert sobel_score(np.zeros((128, 32), dtype=np.uint8)) == 0.0


def test_bent_fixture_suite_straightens_within_thresholds():
    start = time.monotonic()
    cfg = RunConfig()
    bents = []
    for k in range(100):
        img, mask = striped_bar(seed=k)
        spec = sample_bend_spec(seed=1000 + k)
        bents.append(generate_bent(img, mask, spec))

    measured = [_measure(bent, cfg) for bent in bents]
    scale = dataset_scale([m[0] for m in measured],
                          [m[1] for m in measured], cfg)

    l_scores = []
    ma_scores = []
    sobel_decreased = []
    for bent in bents:
        small = _rescale(bent, scale)
        bent_mask = segment(small)
        bent_axis = mask_axis(bent_mask)
        canvas, _ = straighten_sample(small, cfg)
        out_mask = segment(canvas)
        out_axis = mask_axis(out_mask)
        l_scores.append(l_score(len(out_axis), len(bent_axis)))
        ma_scores.append(ma_score(out_axis))
        sobel_decreased.append(sobel_score(out_mask) < sobel_score(bent_mask))
    elapsed = time.monotonic() - start

    assert np.mean(ma_scores) >= 93.0
    assert np.mean(l_scores) >= 90.0
    assert np.mean(sobel_decreased) >= 0.95
    assert elapsed < 60.0


def test_masking_contract_over_ten_thousand_seeds():
    grid = split_grid(128, 32, 16)
    rng = np.random.default_rng(99)
    img = rng.integers(0, 256, size=(128, 32), dtype=np.uint8)
    axis = np.stack([np.arange(128), np.full(128, 8)], axis=1)
    band = axis_distance_map(img.shape, axis) <= AXIS_BAND_RADIUS

    counts = np.zeros(grid.n_cells, dtype=np.int64)
    for seed in range(10_000):
        spec = sample_mask(grid, ratio=0.70, seed=seed)
        assert len(spec.indices) == 22
        counts[list(spec.indices)] += 1
        masked = apply_mask(img, grid, spec, axis, noise_mean=120.0,
                            seed=seed)
        # the full-height axis intersects every left-column cell, so
        # every band pixel sits in an axis cell and must survive
        assert np.array_equal(masked[band], img[band]), seed

    freq = counts / 10_000
    assert np.abs(freq - 22 / 32).max() <= 0.02


def test_folds_never_split_a_group():
    rng = np.random.default_rng(7)
    for trial in range(1000):
        n_groups = int(rng.integers(1, 25))
        records = []
        for g in range(n_groups):
            group = f"g{trial}-{g}"
            size = int(rng.integers(1, 5))
            solo = size == 1 and rng.random() < 0.3
            for k in range(size):
                records.append(SampleRecord(
                    id=f"{group}-s{k}", image_path="x.png",
                    group_id=None if solo else group))
        n_folds = int(rng.integers(1, 9))
        folds = assign_folds(records, n_folds=n_folds, seed=trial)
        seen = {}
        for rec in records:
            fold = folds[rec.group]
            assert 0 <= fold < n_folds
            seen.setdefault(rec.group, set()).add(fold)
        assert all(len(v) == 1 for v in seen.values()), trial
