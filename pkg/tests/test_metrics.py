import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import find_peaks

from chromostraight.fixtures import striped_bar
from chromostraight.metrics import (
    CSV_HEADER,
    ScoreReport,
    classification_metrics,
    density_profile,
    dp_score,
    l_score,
    ma_score,
    sobel_score,
    write_scores_csv,
)
from chromostraight.maskcond import split_grid
from chromostraight.segmentation import segment
from chromostraight.skeleton import MedialAxis, mask_axis
from chromostraight.synthbend import BendSpec, generate_bent


def _axis(points):
    return MedialAxis(points=np.asarray(points, dtype=np.int64))


def _line(n, dr, dc, start=(0, 0)):
    k = np.arange(n)
    return _axis(np.stack([start[0] + k * dr, start[1] + k * dc], axis=1))


def test_l_score_equal_lengths():
    assert l_score(120, 120) == 100.0


def test_l_score_short_prediction():
    assert l_score(90, 100) == pytest.approx(90.0)


def test_l_score_overshoot_goes_negative():
    assert l_score(210, 100) == pytest.approx(-10.0)


def test_l_score_accepts_axis():
    assert l_score(_line(90, 1, 0), 100) == pytest.approx(90.0)


def test_l_score_rejects_zero_target():
    with pytest.raises(ValueError):
        l_score(10, 0)


def test_ma_score_vertical_line_is_perfect():
    assert ma_score(_line(64, 1, 0)) == pytest.approx(100.0)


def test_ma_score_diagonal_line_is_perfect():
    assert ma_score(_line(48, 1, 1)) == pytest.approx(100.0)


def test_ma_score_v_shape_is_zero():
    down_right = np.stack([np.arange(31), np.arange(31)], axis=1)
    j = np.arange(1, 31)
    down_left = np.stack([30 + j, 30 - j], axis=1)
    v = _axis(np.concatenate([down_right, down_left]))
    assert abs(ma_score(v)) <= 1e-9


def test_ma_score_translation_invariant():
    bowed = [(k, int(np.rint(3 * np.sin(k / 10)))) for k in range(40)]
    a = _axis([(r, c + 20) for r, c in bowed])
    b = _axis([(r + 7, c + 33) for r, c in bowed])
    assert ma_score(a) == pytest.approx(ma_score(b))


def test_ma_score_needs_enough_points():
    with pytest.raises(ValueError):
        ma_score(_line(5, 1, 0))


def test_sobel_score_empty_image_is_zero():
    assert sobel_score(np.zeros((128, 32), dtype=np.uint8)) == 0.0


def test_sobel_score_border_run():
    b = np.zeros((8, 16), dtype=np.uint8)
    b[0, 5:10] = 1
    assert sobel_score(b) == pytest.approx(0.2, abs=1e-12)


def test_sobel_score_checks_grid_shape():
    grid = split_grid(128, 32, 16)
    with pytest.raises(ValueError):
        sobel_score(np.zeros((64, 32), dtype=np.uint8), grid=grid)


def test_sobel_score_drops_after_unbending():
    img, mask = striped_bar(seed=6)
    spec = BendSpec(control_points=(0.5,), factors=(1.3,), seed=6)
    bent = generate_bent(img, mask, spec)
    assert sobel_score(segment(img)) < sobel_score(segment(bent))


def test_density_profile_constant_image():
    img = np.full((60, 20), 50, dtype=np.uint8)
    prof = density_profile(img, _line(40, 1, 0, start=(10, 10)))
    assert np.array_equal(prof, np.full(40, 50.0))


def test_density_profile_tracks_gradient():
    rows = np.arange(100, dtype=np.float64)
    img = np.clip(np.outer(rows * 2, np.ones(20)), 0, 255).astype(np.uint8)
    prof = density_profile(img, _line(50, 1, 0, start=(5, 10)))
    assert (np.diff(prof) > 0).all()


def test_density_profile_recovers_band_period():
    rows = np.arange(128, dtype=np.float64)
    stripes = 128.0 + 100.0 * np.cos(2.0 * np.pi * rows / 8.0)
    img = np.clip(np.rint(np.tile(stripes[:, None], (1, 24))),
                  0, 255).astype(np.uint8)
    prof = density_profile(img, _line(120, 1, 0, start=(4, 12)))
    peaks, _ = find_peaks(prof, distance=5)
    spacing = np.diff(peaks)
    assert 7.0 <= spacing.mean() <= 9.0


def test_dp_score_identical_profiles():
    prof = np.linspace(0, 255, 80)
    assert dp_score(prof, prof) == 0.0


def test_dp_score_black_vs_white():
    assert dp_score(np.zeros(50), np.full(50, 255.0)) == pytest.approx(100.0)


def test_dp_score_resampling_error_is_small():
    k = np.arange(40, dtype=np.float64)
    prof = 100.0 + 80.0 * np.sin(2.0 * np.pi * k / 40.0 * 3.0)
    longer = np.interp(np.linspace(0, 39, 160), k, prof)
    assert dp_score(prof, longer) <= 1.0


def test_dp_score_symmetric_for_equal_lengths():
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 255, size=60)
    b = rng.uniform(0, 255, size=60)
    assert dp_score(a, b) == pytest.approx(dp_score(b, a))


def test_dp_score_rejects_empty():
    with pytest.raises(ValueError):
        dp_score(np.array([]), np.array([1.0]))


def test_classification_metrics_perfect_diagonal():
    out = classification_metrics(np.diag([5, 9, 3]))
    assert out == {"accuracy": 1.0, "recall": 1.0,
                   "precision": 1.0, "f1": 1.0}


def test_classification_metrics_coin_flip():
    out = classification_metrics(np.array([[1, 1], [1, 1]]))
    for value in out.values():
        assert value == pytest.approx(0.5)


def test_classification_metrics_partial_recall():
    cm = np.array([[10, 0, 0], [0, 0, 10], [0, 0, 10]])
    out = classification_metrics(cm)
    assert out["recall"] == pytest.approx(2.0 / 3.0)


def test_classification_metrics_binary_accuracy_is_trace_share():
    rng = np.random.default_rng(5)
    for _ in range(20):
        cm = rng.integers(0, 50, size=(2, 2))
        if cm.sum() == 0:
            continue
        out = classification_metrics(cm)
        assert out["accuracy"] == pytest.approx(np.trace(cm) / cm.sum())


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_classification_metrics_stay_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 6))
    cm = rng.integers(0, 30, size=(k, k))
    if cm.sum() == 0:
        cm[0, 0] = 1
    out = classification_metrics(cm)
    for value in out.values():
        assert 0.0 <= value <= 1.0


def test_classification_metrics_rejects_non_square():
    with pytest.raises(ValueError):
        classification_metrics(np.ones((2, 3)))


def test_score_report_row_formatting():
    rep = ScoreReport(id="s1", l_score=98.5, ma_score=99.1234567,
                      sobel_score=0.2, dp_score=1.0)
    assert rep.csv_row() == ["s1", "98.5000", "99.1235", "0.2000",
                             "1.0000", ""]
    rep.lpips = 0.25
    assert rep.csv_row()[-1] == "0.2500"


def test_write_scores_csv_round_trip(tmp_path):
    reports = [ScoreReport(id=f"s{i}", l_score=90.0 + i, ma_score=95.0,
                           sobel_score=0.5, dp_score=2.0) for i in range(3)]
    path = tmp_path / "scores.csv"
    write_scores_csv(reports, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(CSV_HEADER)
    assert len(rows) == 4
    assert rows[1][0] == "s0"
    assert rows[2][1] == "91.0000"
