import io
import struct

import numpy as np
import pytest

from uodkit.errors import DataError, FormatError
from uodkit.formats import (
    fmap_from_bytes,
    fmap_to_bytes,
    format_boxes,
    heatmap_from_bytes,
    load_checkpoint,
    load_mask,
    mask_from_bytes,
    mask_to_bytes,
    parse_boxes,
    save_checkpoint,
)
from uodkit.types import BoundingBox, FeatureMap, ProjectionMap, SegMask


def test_fmap_smallest_file():
    blob = fmap_to_bytes(FeatureMap(1, 1, 1, np.array([0.0])))
    assert len(blob) == 20
    assert blob == b"FMP1" + struct.pack("<III", 1, 1, 1) + struct.pack("<f", 0.0)


def test_fmap_file_length_arithmetic():
    fm = FeatureMap.from_array(np.zeros((2, 2, 3)))
    assert len(fmap_to_bytes(fm)) == 4 + 12 + 4 * 12


def test_fmap_roundtrip_bit_exact():
    rng = np.random.Generator(np.random.PCG64(42))
    for _ in range(100):
        c, h, w = (int(rng.integers(1, 9)) for _ in range(3))
        data = rng.standard_normal((c, h, w)).astype(np.float32)
        blob = fmap_to_bytes(FeatureMap.from_array(data))
        again = fmap_to_bytes(fmap_from_bytes(blob))
        assert blob == again


def test_fmap_load_smallest():
    fm = fmap_from_bytes(b"FMP1" + struct.pack("<III", 1, 1, 1) + struct.pack("<f", 0.0))
    assert fm.shape == (1, 1, 1)
    assert fm.data[0, 0, 0] == 0.0


def test_fmap_bad_magic():
    blob = b"XXXX" + struct.pack("<III", 1, 1, 1) + struct.pack("<f", 0.0)
    with pytest.raises(FormatError, match="magic"):
        fmap_from_bytes(blob)


def test_fmap_truncated_payload():
    blob = fmap_to_bytes(FeatureMap.from_array(np.ones((2, 2, 3))))
    with pytest.raises(FormatError, match="truncated"):
        fmap_from_bytes(blob[:-1])


def test_fmap_nonfinite_names_first_index():
    data = np.zeros((1, 2, 2), dtype="<f4")
    data[0, 1, 0] = np.nan
    blob = b"FMP1" + struct.pack("<III", 1, 2, 2) + data.tobytes()
    with pytest.raises(DataError, match="index 2"):
        fmap_from_bytes(blob)


def test_fmap_rejects_header_mutations():
    good = fmap_to_bytes(FeatureMap.from_array(np.ones((2, 3, 4))))
    for pos in range(4):  # every corrupted magic byte
        bad = bytearray(good)
        bad[pos] ^= 0xFF
        with pytest.raises(FormatError):
            fmap_from_bytes(bytes(bad))
    # inflated dimension field -> payload too short
    bad = bytearray(good)
    bad[4:8] = struct.pack("<I", 60000)
    with pytest.raises(FormatError):
        fmap_from_bytes(bytes(bad))
    # zero dimension
    bad = bytearray(good)
    bad[4:8] = struct.pack("<I", 0)
    with pytest.raises(FormatError):
        fmap_from_bytes(bytes(bad))
    # trailing garbage
    with pytest.raises(FormatError):
        fmap_from_bytes(good + b"\x00")


def test_mask_pgm_all_foreground():
    blob = mask_to_bytes(SegMask.from_array(np.ones((2, 2), dtype=np.uint8)))
    assert blob == b"P5\n2 2\n255\n" + bytes([255, 255, 255, 255])


def test_heatmap_quantization():
    heat = ProjectionMap.from_array(np.array([[0.0, 0.5], [0.5, 1.0]]))
    blob = mask_to_bytes(heat)
    assert blob == b"P5\n2 2\n255\n" + bytes([0, 128, 128, 255])


def test_heatmap_degenerate_all_zero():
    heat = ProjectionMap.from_array(np.full((2, 3), 0.7))
    assert mask_to_bytes(heat).endswith(bytes(6))


def test_mask_roundtrip_and_threshold():
    rng = np.random.Generator(np.random.PCG64(3))
    for _ in range(100):
        h, w = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        mask = SegMask.from_array(rng.integers(0, 2, size=(h, w)))
        again = mask_from_bytes(mask_to_bytes(mask))
        assert np.array_equal(mask.bits, again.bits)
    # byte 128 -> 1, byte 127 -> 0
    blob = b"P5\n2 1\n255\n" + bytes([128, 127])
    loaded = load_mask(io.BytesIO(blob))
    assert loaded.bits.tolist() == [[1, 0]]


def test_mask_rejects_ascii_pgm():
    with pytest.raises(FormatError):
        load_mask(io.BytesIO(b"P2\n2 2\n255\n0 0 0 0"))


def test_heatmap_load_scale():
    blob = b"P5\n2 1\n255\n" + bytes([0, 255])
    heat = heatmap_from_bytes(blob)
    assert heat.values.tolist() == [[0.0, 1.0]]


def test_box_lines():
    assert format_boxes("img1", [BoundingBox(0, 0, 9, 9)]) == "img1 0,0,9,9"
    assert format_boxes("img2", []) == "img2"
    two = [BoundingBox(0, 0, 9, 9), BoundingBox(10, 10, 19, 19)]
    assert format_boxes("img3", two) == "img3 0,0,9,9;10,10,19,19"


def test_box_roundtrip():
    boxes = [BoundingBox(1, 2, 3, 4), BoundingBox(0, 0, 63, 63)]
    stem, parsed = parse_boxes(format_boxes("scene_07", boxes))
    assert stem == "scene_07"
    assert parsed == boxes
    stem, parsed = parse_boxes("empty")
    assert (stem, parsed) == ("empty", [])


def test_box_parse_rejects_malformed():
    with pytest.raises(FormatError):
        parse_boxes("img 1,2,3")
    with pytest.raises(FormatError):
        parse_boxes("img a,b,c,d")


def test_checkpoint_roundtrip():
    rng = np.random.Generator(np.random.PCG64(9))
    tensors = {
        "layer.weight": rng.standard_normal((4, 7)).astype(np.float32),
        "layer.bias": rng.standard_normal(4).astype(np.float32),
        "meta": np.array([8.0], dtype=np.float32),
    }
    sink = io.BytesIO()
    save_checkpoint(tensors, sink)
    loaded = load_checkpoint(io.BytesIO(sink.getvalue()))
    assert set(loaded) == set(tensors)
    for name in tensors:
        assert np.array_equal(loaded[name], np.asarray(tensors[name], dtype=np.float32))


def test_checkpoint_bad_magic():
    with pytest.raises(FormatError):
        load_checkpoint(io.BytesIO(b"BAD!" + b"\x00" * 16))
