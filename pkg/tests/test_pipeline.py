import csv
import json
import os

import numpy as np
import pytest

from chromostraight.cli import main
from chromostraight.fixtures import striped_bar
from chromostraight.imageio import load_image, save_image
from chromostraight.manifest import (
    RunConfig,
    SampleRecord,
    assign_folds,
    load_manifest,
    sample_seed,
    save_manifest,
)
from chromostraight.maskcond import axis_distance_map
from chromostraight.metrics import ma_score
from chromostraight.pipeline import dataset_scale, load_pairs, place_on_canvas
from chromostraight.segmentation import background_mean, segment
from chromostraight.skeleton import mask_axis


def test_config_defaults():
    cfg = RunConfig()
    assert (cfg.patch_h, cfg.patch_w) == (8, 16)
    assert (cfg.canvas_h, cfg.canvas_w) == (128, 32)
    assert cfg.grid_rows == 16
    assert cfg.mask_ratio == 0.70
    assert cfg.threshold_t == 18.0
    assert cfg.prune_ratio == 0.1
    assert cfg.synth_variants == 5


def test_config_json_round_trip(tmp_path):
    cfg = RunConfig(seed=7, mask_ratio=0.5, workers=2)
    path = tmp_path / "config.json"
    cfg.to_json(path)
    assert RunConfig.from_json(path) == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        RunConfig.from_dict({"patch_h": 8, "typo_key": 1})


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(canvas_h=100, grid_rows=16)
    with pytest.raises(ValueError):
        RunConfig(patch_w=64)
    with pytest.raises(ValueError):
        RunConfig(mask_ratio=1.5)
    with pytest.raises(ValueError):
        RunConfig(workers=0)


def test_config_replace_leaves_original():
    cfg = RunConfig()
    other = cfg.replace(seed=9)
    assert other.seed == 9
    assert cfg.seed == 0


def test_manifest_round_trip(tmp_path):
    records = [
        SampleRecord(id="a", image_path="a.png", group_id="a", kind="real"),
        SampleRecord(id="a-b0", image_path="a-b0.png", group_id="a",
                     kind="synthetic", axis=[[0, 1], [1, 1]],
                     mask_indices=[3, 4], seed=12, fold=2, split="train"),
    ]
    path = tmp_path / "manifest.json"
    save_manifest(records, path, extra={"scale": 0.75})
    loaded, extra = load_manifest(path)
    assert loaded == records
    assert extra == {"scale": 0.75}


def test_manifest_accepts_bare_list(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps([{"id": "x", "image_path": "x.png"}]))
    records, extra = load_manifest(path)
    assert records[0].id == "x"
    assert extra == {}


def test_manifest_rejects_duplicate_ids(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps([{"id": "x", "image_path": "x.png"},
                                {"id": "x", "image_path": "y.png"}]))
    with pytest.raises(ValueError):
        load_manifest(path)


def test_manifest_rejects_unknown_sample_keys(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps([{"id": "x", "image_path": "x.png",
                                 "surprise": 1}]))
    with pytest.raises(ValueError):
        load_manifest(path)


def test_record_group_falls_back_to_id():
    rec = SampleRecord(id="solo", image_path="solo.png")
    assert rec.group == "solo"
    with pytest.raises(ValueError):
        SampleRecord(id="bad", image_path="bad.png", kind="imaginary")


def test_sample_seed_frozen_value():
    assert sample_seed(0, "a", "") == 4230269713407499534


def test_sample_seed_separates_purposes():
    assert sample_seed(0, "a", "mask") != sample_seed(0, "a", "noise")
    assert sample_seed(0, "a") != sample_seed(1, "a")
    assert 0 <= sample_seed(3, "z", "p") < 2 ** 63


def test_assign_folds_keeps_groups_together():
    records = []
    for g in range(10):
        for k in range(3):
            records.append(SampleRecord(id=f"s{g}-{k}", image_path="x.png",
                                        group_id=f"g{g}"))
    folds = assign_folds(records, n_folds=5, seed=0)
    assert set(folds) == {f"g{g}" for g in range(10)}
    assert set(folds.values()) <= set(range(5))
    counts = np.bincount(list(folds.values()), minlength=5)
    assert (counts == 2).all()
    assert folds == assign_folds(records, n_folds=5, seed=0)


def test_place_on_canvas_centers_and_fills():
    stack = np.full((4, 2), 10, dtype=np.uint8)
    out = place_on_canvas(stack, 8, 6, fill=200)
    assert out.shape == (8, 6)
    assert (out[2:6, 2:4] == 10).all()
    assert (out[:2] == 200).all()
    with pytest.raises(ValueError):
        place_on_canvas(np.zeros((10, 2), dtype=np.uint8), 8, 6, fill=0)


def test_dataset_scale_is_shrink_only():
    cfg = RunConfig()
    assert dataset_scale([240.0], [16.0], cfg) == pytest.approx(0.5)
    assert dataset_scale([60.0], [8.0], cfg) == 1.0
    assert dataset_scale([120.0], [32.0], cfg) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        dataset_scale([], [], cfg)


def test_load_pairs_requires_keys(tmp_path):
    path = tmp_path / "pairs.json"
    path.write_text(json.dumps([{"id": "p", "input": "a.png"}]))
    with pytest.raises(ValueError):
        load_pairs(path)


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    """Run the full CLI chain once; individual tests inspect the output."""
    root = tmp_path_factory.mktemp("chain")
    fix = root / "fixtures"
    synth = root / "synth"
    pre = root / "preprocessed"
    prep = root / "prepared"
    assert main(["fixtures", "--out", str(fix), "--count", "4",
                 "--seed", "1"]) == 0
    assert main(["synth", "--out", str(synth),
                 "--manifest", str(fix / "manifest.json"),
                 "--seed", "1", "--variants", "2"]) == 0
    assert main(["preprocess", "--out", str(pre),
                 "--manifest", str(synth / "manifest.json"),
                 "--seed", "1"]) == 0
    assert main(["prepare", "--out", str(prep),
                 "--manifest", str(pre / "manifest.json"),
                 "--seed", "1", "--folds", "3", "--val-fold", "0"]) == 0
    return {"root": root, "fixtures": fix, "synth": synth,
            "preprocessed": pre, "prepared": prep}


def test_chain_fixture_outputs(chain):
    files = sorted(os.listdir(chain["fixtures"]))
    assert sum(f.endswith(".png") for f in files) == 4
    assert "manifest.json" in files and "report.json" in files


def test_chain_synth_outputs(chain):
    records, _ = load_manifest(chain["synth"] / "manifest.json")
    kinds = [rec.kind for rec in records]
    assert kinds.count("real") == 4
    assert kinds.count("synthetic") == 8
    for rec in records:
        if rec.kind == "synthetic":
            assert rec.group_id == rec.id.split("-b")[0]
            assert (chain["synth"] / rec.image_path).exists()


def test_chain_preprocess_outputs(chain):
    records, extra = load_manifest(chain["preprocessed"] / "manifest.json")
    assert len(records) == 12
    assert extra["canvas"] == [128, 32]
    assert 0.0 < extra["scale"] <= 1.0
    for rec in records:
        img = load_image(chain["preprocessed"] / rec.image_path)
        assert img.shape == (128, 32)
        assert rec.axis is not None


def test_chain_straight_bar_stays_straight(chain):
    canvas = load_image(chain["preprocessed"] / "bar000.png")
    axis = mask_axis(segment(canvas))
    assert ma_score(axis) >= 99.0


def test_chain_prepare_writes_one_trio_per_sample(chain):
    records, extra = load_manifest(chain["prepared"] / "manifest.json")
    assert len(records) == 12
    pngs = [f for f in os.listdir(chain["prepared"]) if f.endswith(".png")]
    assert len(pngs) == 36
    for rec in records:
        for suffix in ("original", "masked", "condition"):
            assert (chain["prepared"] / f"{rec.id}_{suffix}.png").exists()
    assert extra["grid_rows"] == 16
    assert extra["mask_ratio"] == 0.70


def test_chain_prepare_masks_twenty_two_cells(chain):
    records, _ = load_manifest(chain["prepared"] / "manifest.json")
    for rec in records:
        assert len(rec.mask_indices) == 22
        assert rec.fold in (0, 1, 2)
        assert rec.split == ("val" if rec.fold == 0 else "train")


def test_chain_prepare_keeps_groups_in_one_fold(chain):
    records, _ = load_manifest(chain["prepared"] / "manifest.json")
    fold_of = {}
    for rec in records:
        fold_of.setdefault(rec.group, set()).add(rec.fold)
    assert all(len(folds) == 1 for folds in fold_of.values())


def test_chain_condition_images_use_label_palette(chain):
    cond = load_image(chain["prepared"] / "bar000-b0_condition.png")
    assert set(np.unique(cond)) <= {0, 128, 255}
    assert cond.shape == (128, 32)


def test_chain_masked_cells_carry_background_noise(chain):
    records, _ = load_manifest(chain["prepared"] / "manifest.json")
    rec = next(r for r in records if r.id == "bar001")
    original = load_image(chain["prepared"] / f"{rec.id}_original.png")
    masked = load_image(chain["prepared"] / f"{rec.id}_masked.png")
    bg = background_mean(original, segment(original))
    axis = np.asarray(rec.axis)
    dist = axis_distance_map(original.shape, axis)
    samples = []
    for idx in rec.mask_indices:
        r, c = divmod(idx, 2)
        sl = (slice(r * 8, (r + 1) * 8), slice(c * 16, (c + 1) * 16))
        keep = dist[sl] > 3.0
        samples.append(masked[sl][keep].astype(np.float64))
    pixels = np.concatenate(samples)
    assert len(pixels) > 2000
    # clipping at 255 pulls the observed moments slightly low
    assert abs(pixels.mean() - bg) <= 6.0
    assert 17.0 <= pixels.std() <= 27.0


def test_chain_rerun_is_byte_identical(chain, tmp_path):
    pre2 = tmp_path / "pre2"
    assert main(["preprocess", "--out", str(pre2),
                 "--manifest", str(chain["synth"] / "manifest.json"),
                 "--seed", "1"]) == 0
    for name in ("bar000.png", "bar002-b1.png", "manifest.json"):
        a = (chain["preprocessed"] / name).read_bytes()
        b = (pre2 / name).read_bytes()
        assert a == b, name


def test_chain_evaluate_writes_csv_and_figures(chain, tmp_path):
    pre = chain["preprocessed"]
    records, _ = load_manifest(pre / "manifest.json")
    pairs = [{"id": rec.id,
              "input": str(chain["synth"] / rec.image_path),
              "output": str(pre / rec.image_path)}
             for rec in records if rec.kind == "synthetic"]
    pairs.append({"id": "self", "input": str(pre / "bar000.png"),
                  "output": str(pre / "bar000.png"), "method": "noop"})
    pairs_path = tmp_path / "pairs.json"
    pairs_path.write_text(json.dumps(pairs))
    out = tmp_path / "eval"
    assert main(["evaluate", "--out", str(out),
                 "--pairs", str(pairs_path)]) == 0
    with open(out / "scores.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == len(pairs) + 1
    by_id = {row[0]: row for row in rows[1:]}
    assert by_id["self"][1] == "100.0000"    # identical pair: perfect length
    assert by_id["self"][4] == "0.0000"      # and zero profile distance
    assert (out / "summary.csv").exists()
    assert (out / "figures" / "score_distributions.png").exists()
    assert (out / "figures" / "score_by_method.png").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["processed"] == len(pairs)


def test_keep_going_records_failures_and_exits_zero(chain, tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    good, _ = striped_bar(seed=2)
    save_image(good, src / "good.png")
    save_image(np.full((200, 48), 230, dtype=np.uint8), src / "flat.png")
    records = [SampleRecord(id="good", image_path="good.png"),
               SampleRecord(id="flat", image_path="flat.png")]
    save_manifest(records, src / "manifest.json")

    strict = tmp_path / "strict"
    assert main(["preprocess", "--out", str(strict),
                 "--manifest", str(src / "manifest.json")]) == 1

    lax = tmp_path / "lax"
    assert main(["preprocess", "--out", str(lax),
                 "--manifest", str(src / "manifest.json"),
                 "--keep-going"]) == 0
    report = json.loads((lax / "report.json").read_text())
    assert "flat" in report["failed"]
    assert report["processed"] == 1
    assert (lax / "good.png").exists()
    assert not (lax / "flat.png").exists()


def test_cli_config_file_and_flag_precedence(chain, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"mask_ratio": 0.5, "seed": 1}))
    out_cfg = tmp_path / "by_config"
    assert main(["prepare", "--out", str(out_cfg),
                 "--manifest", str(chain["preprocessed"] / "manifest.json"),
                 "--config", str(config)]) == 0
    records, extra = load_manifest(out_cfg / "manifest.json")
    assert extra["mask_ratio"] == 0.5
    assert all(len(rec.mask_indices) == 16 for rec in records)

    out_flag = tmp_path / "by_flag"
    assert main(["prepare", "--out", str(out_flag),
                 "--manifest", str(chain["preprocessed"] / "manifest.json"),
                 "--config", str(config), "--mask-ratio", "0.25"]) == 0
    records, extra = load_manifest(out_flag / "manifest.json")
    assert extra["mask_ratio"] == 0.25
    assert all(len(rec.mask_indices) == 8 for rec in records)
