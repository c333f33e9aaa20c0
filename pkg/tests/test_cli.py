import numpy as np
import pytest

from uodkit.cli import run
from uodkit.formats import fmap_to_bytes, mask_from_bytes, mask_to_bytes, parse_boxes
from uodkit.pca import DiscoveryConfig, discover
from uodkit.types import FeatureMap, SegMask


@pytest.fixture
def planted_features(tmp_path):
    feat_dir = tmp_path / "features"
    feat_dir.mkdir()
    rng = np.random.Generator(np.random.PCG64(0))
    maps = {}
    for stem in ("img_a", "img_b", "img_c"):
        data = rng.standard_normal((4, 8, 8))
        data[0, 2:5, 2:5] += 4.0
        fm = FeatureMap.from_array(data)
        (feat_dir / f"{stem}.fmp1").write_bytes(fmap_to_bytes(fm))
        maps[stem] = fm
    return feat_dir, maps


def test_discover_writes_masks(tmp_path, planted_features):
    feat_dir, maps = planted_features
    mask_dir = tmp_path / "masks"
    code = run([
        "discover", "--features", str(feat_dir),
        "--out-mask", str(mask_dir), "--out-heatmap", str(tmp_path / "heat"),
    ])
    assert code == 0
    for stem, fm in maps.items():
        with open(mask_dir / f"{stem}.pgm", "rb") as fh:
            served = mask_from_bytes(fh.read())
        assert np.array_equal(served.bits, discover(fm, DiscoveryConfig()).mask.bits)


def test_discover_single_file(tmp_path, planted_features):
    feat_dir, _ = planted_features
    code = run([
        "discover", "--features", str(feat_dir / "img_a.fmp1"),
        "--out-mask", str(tmp_path / "masks"),
    ])
    assert code == 0
    assert (tmp_path / "masks" / "img_a.pgm").exists()


def test_discover_idempotent_and_jobs_invariant(tmp_path, planted_features):
    feat_dir, _ = planted_features
    outs = []
    for run_dir, jobs in (("m1", "1"), ("m2", "1"), ("m4", "4")):
        code = run([
            "--jobs", jobs, "discover", "--features", str(feat_dir),
            "--out-mask", str(tmp_path / run_dir),
        ])
        assert code == 0
        outs.append(b"".join(
            sorted_path.read_bytes()
            for sorted_path in sorted((tmp_path / run_dir).glob("*.pgm"))
        ))
    assert outs[0] == outs[1] == outs[2]


def test_discover_corrupt_input_exit_2(tmp_path):
    feat_dir = tmp_path / "features"
    feat_dir.mkdir()
    (feat_dir / "bad.fmp1").write_bytes(b"XXXX" + bytes(16))
    code = run(["discover", "--features", str(feat_dir), "--out-mask", str(tmp_path / "m")])
    assert code == 2


def test_bbox_two_blob_case(tmp_path):
    bits = np.zeros((100, 100), dtype=np.uint8)
    bits[10:30, 10:30] = 1
    bits[70:90, 60:80] = 1
    mask_dir = tmp_path / "masks"
    mask_dir.mkdir()
    (mask_dir / "two.pgm").write_bytes(mask_to_bytes(SegMask.from_array(bits)))
    out = tmp_path / "boxes.txt"
    assert run(["bbox", "--masks", str(mask_dir), "--out", str(out)]) == 0
    stem, boxes = parse_boxes(out.read_text().strip())
    assert stem == "two"
    assert len(boxes) == 3


def test_eval_report_written(tmp_path):
    pred = tmp_path / "pred"
    gt = tmp_path / "gt"
    pred.mkdir()
    gt.mkdir()
    bits = np.zeros((16, 16), dtype=np.uint8)
    bits[3:9, 3:9] = 1
    blob = mask_to_bytes(SegMask.from_array(bits))
    for stem in ("a", "b"):
        (pred / f"{stem}.pgm").write_bytes(blob)
        (gt / f"{stem}.pgm").write_bytes(blob)
    out = tmp_path / "report.txt"
    assert run(["eval", "--pred", str(pred), "--gt", str(gt), "--out", str(out)]) == 0
    text = out.read_text()
    assert "f_beta_max: 1.0000" in text
    assert "n_images: 2" in text


def test_eval_mismatched_stems_exit_2(tmp_path, capsys):
    pred = tmp_path / "pred"
    gt = tmp_path / "gt"
    pred.mkdir()
    gt.mkdir()
    blob = mask_to_bytes(SegMask.from_array(np.ones((4, 4), dtype=np.uint8)))
    (pred / "only_pred.pgm").write_bytes(blob)
    (gt / "only_gt.pgm").write_bytes(blob)
    assert run(["eval", "--pred", str(pred), "--gt", str(gt)]) == 2
    err = capsys.readouterr().err
    assert "only_pred" in err and "only_gt" in err


def test_video_subcommand(tmp_path):
    rgb_dir = tmp_path / "rgb"
    flow_dir = tmp_path / "flow"
    rgb_dir.mkdir()
    flow_dir.mkdir()
    rng = np.random.Generator(np.random.PCG64(3))
    for i in range(3):
        rgb = rng.standard_normal((3, 6, 6))
        rgb[0, 2:4, 2:4] += 3.0
        (rgb_dir / f"f{i}.fmp1").write_bytes(fmap_to_bytes(FeatureMap.from_array(rgb)))
        flow = rng.standard_normal((3, 6, 6))
        (flow_dir / f"f{i}.fmp1").write_bytes(fmap_to_bytes(FeatureMap.from_array(flow)))
    out = tmp_path / "out"
    code = run([
        "video", "--rgb", str(rgb_dir), "--flow", str(flow_dir), "--out", str(out),
    ])
    assert code == 0
    assert sorted(p.name for p in out.glob("*.pgm")) == ["f0.pgm", "f1.pgm", "f2.pgm"]


def test_video_count_mismatch_exit_2(tmp_path):
    rgb_dir = tmp_path / "rgb"
    flow_dir = tmp_path / "flow"
    rgb_dir.mkdir()
    flow_dir.mkdir()
    fm = FeatureMap.from_array(np.random.rand(2, 4, 4))
    (rgb_dir / "a.fmp1").write_bytes(fmap_to_bytes(fm))
    (rgb_dir / "b.fmp1").write_bytes(fmap_to_bytes(fm))
    (flow_dir / "a.fmp1").write_bytes(fmap_to_bytes(fm))
    assert run(["video", "--rgb", str(rgb_dir), "--flow", str(flow_dir),
                "--out", str(tmp_path / "o")]) == 2


def test_train_toy_subcommand(tmp_path):
    ckpt = tmp_path / "enc.ntx"
    report = tmp_path / "train.txt"
    code = run([
        "train-toy", "--epochs", "2", "--batch", "8", "--scenes", "16",
        "--eval-scenes", "4", "--seed", "3",
        "--out-ckpt", str(ckpt), "--report", str(report),
    ])
    assert code == 0
    from uodkit.toy import load_toy_encoder

    with open(ckpt, "rb") as fh:
        encoder = load_toy_encoder(fh)
    assert encoder.embed_dim == 16
    text = report.read_text()
    assert text.startswith("epoch 0:")
    assert "trained_iou:" in text


def test_selfcheck_subcommand(capsys):
    assert run(["selfcheck"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 7
    assert "FAIL" not in out


def test_usage_errors_exit_1(capsys):
    assert run([]) == 1
    assert run(["discover"]) == 1  # missing required flags
    assert run(["discover", "--features", "x", "--out-mask", "y", "--bogus", "1"]) == 1
    assert run(["no-such-command"]) == 1
