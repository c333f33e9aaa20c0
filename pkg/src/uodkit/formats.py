"""Bit-exact interchange formats.

* FMP1   -- dense feature maps: magic ``FMP1``, u32le c,h,w, then c*h*w
            IEEE-754 binary32 little-endian values in channel-major order.
* PGM    -- binary (P5) 8-bit images for masks and quantized heatmaps.
* boxes  -- one text line per image: ``<id> x,y,x,y;x,y,x,y``.
* NTX1   -- named-tensor checkpoint container (FMP1-style framing).
"""

from __future__ import annotations

import io
import re
import struct
from typing import BinaryIO, Mapping

import numpy as np

from .errors import DataError, FormatError
from .types import BoundingBox, FeatureMap, ProjectionMap, SegMask

FMAP_MAGIC = b"FMP1"
CKPT_MAGIC = b"NTX1"

# Quantized heatmaps with spread below this are emitted as all zeros; an
# all-equal map carries no object evidence.
DEGENERATE_SPAN = 1e-12


def _read_exact(source: BinaryIO, n: int, what: str) -> bytes:
    buf = source.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated {what}: wanted {n} bytes, got {len(buf)}")
    return buf


# ---------------------------------------------------------------------------
# FMP1 feature maps
# ---------------------------------------------------------------------------

def save_fmap(fmap: FeatureMap, destination: BinaryIO) -> None:
    """Write a feature map in FMP1 framing."""
    destination.write(FMAP_MAGIC)
    destination.write(struct.pack("<III", fmap.channels, fmap.height, fmap.width))
    payload = np.ascontiguousarray(fmap.data, dtype="<f4")
    destination.write(payload.tobytes())


def load_fmap(source: BinaryIO) -> FeatureMap:
    """Read one FMP1 feature map; validates magic, dims, length and finiteness."""
    magic = _read_exact(source, 4, "FMP1 magic")
    if magic != FMAP_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FMAP_MAGIC!r}")
    c, h, w = struct.unpack("<III", _read_exact(source, 12, "FMP1 header"))
    if c < 1 or h < 1 or w < 1:
        raise FormatError(f"FMP1 dims must be positive, got c={c} h={h} w={w}")
    n = c * h * w
    raw = source.read(4 * n)
    if len(raw) != 4 * n:
        raise FormatError(
            f"truncated FMP1 payload: declared {n} values ({4 * n} bytes), got {len(raw)} bytes"
        )
    trailing = source.read(1)
    if trailing:
        raise FormatError("trailing bytes after FMP1 payload")
    data = np.frombuffer(raw, dtype="<f4")
    bad = ~np.isfinite(data)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise DataError(f"non-finite value at flat index {idx}")
    return FeatureMap(c, h, w, data)


def fmap_to_bytes(fmap: FeatureMap) -> bytes:
    sink = io.BytesIO()
    save_fmap(fmap, sink)
    return sink.getvalue()


def fmap_from_bytes(blob: bytes) -> FeatureMap:
    return load_fmap(io.BytesIO(blob))


# ---------------------------------------------------------------------------
# PGM masks and heatmaps
# ---------------------------------------------------------------------------

def quantize_heatmap(heatmap: ProjectionMap) -> np.ndarray:
    """Min-max normalize to [0,1] and quantize to bytes via round(v*255).

    Degenerate rule: if max - min < 1e-12 the output is all zeros.
    """
    vals = heatmap.values
    lo = float(vals.min())
    hi = float(vals.max())
    if hi - lo < DEGENERATE_SPAN:
        return np.zeros(vals.shape, dtype=np.uint8)
    norm = (vals - lo) / (hi - lo)
    return np.floor(norm * 255.0 + 0.5).astype(np.uint8)


def save_mask(image: SegMask | ProjectionMap, destination: BinaryIO) -> None:
    """Write a binary (P5) PGM; masks map 1 -> 255, heatmaps are quantized."""
    if isinstance(image, SegMask):
        body = (image.bits.astype(np.uint8) * np.uint8(255))
    elif isinstance(image, ProjectionMap):
        body = quantize_heatmap(image)
    else:
        raise DataError(f"cannot save object of type {type(image).__name__} as PGM")
    h, w = body.shape
    destination.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
    destination.write(body.tobytes())


_PGM_HEADER = re.compile(rb"^P5\n(\d+) (\d+)\n255\n")


def _load_pgm_bytes(source: BinaryIO) -> np.ndarray:
    blob = source.read()
    m = _PGM_HEADER.match(blob)
    if not m:
        raise FormatError("not a binary PGM (expected 'P5\\n<w> <h>\\n255\\n' header)")
    w, h = int(m.group(1)), int(m.group(2))
    if w < 1 or h < 1:
        raise FormatError(f"PGM dims must be positive, got {w}x{h}")
    body = blob[m.end():]
    if len(body) != w * h:
        raise FormatError(f"PGM payload has {len(body)} bytes, expected {w * h}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)


def load_mask(source: BinaryIO) -> SegMask:
    """Read a binary PGM as a mask: byte > 127 -> 1, else 0."""
    pixels = _load_pgm_bytes(source)
    return SegMask(pixels.shape[0], pixels.shape[1], (pixels > 127).astype(np.uint8))


def load_heatmap(source: BinaryIO) -> ProjectionMap:
    """Read a binary PGM as a heatmap with values byte/255 in [0,1]."""
    pixels = _load_pgm_bytes(source)
    return ProjectionMap(pixels.shape[0], pixels.shape[1], pixels.astype(np.float64) / 255.0)


def mask_to_bytes(image: SegMask | ProjectionMap) -> bytes:
    sink = io.BytesIO()
    save_mask(image, sink)
    return sink.getvalue()


def mask_from_bytes(blob: bytes) -> SegMask:
    return load_mask(io.BytesIO(blob))


def heatmap_from_bytes(blob: bytes) -> ProjectionMap:
    return load_heatmap(io.BytesIO(blob))


# ---------------------------------------------------------------------------
# Box text format
# ---------------------------------------------------------------------------

def format_boxes(image_id: str, boxes: list[BoundingBox]) -> str:
    """One-line record: the id, then semicolon-separated x,y,x,y quadruples."""
    if not image_id or any(ch.isspace() for ch in image_id):
        raise DataError(f"image id must be non-empty and without whitespace: {image_id!r}")
    if not boxes:
        return image_id
    rendered = ";".join(",".join(str(v) for v in b.as_tuple()) for b in boxes)
    return f"{image_id} {rendered}"


def save_boxes(image_id: str, boxes: list[BoundingBox], destination) -> None:
    destination.write(format_boxes(image_id, boxes) + "\n")


def parse_boxes(line: str) -> tuple[str, list[BoundingBox]]:
    """Inverse of format_boxes for a single stripped line."""
    line = line.strip()
    if not line:
        raise FormatError("empty box record")
    parts = line.split(" ", 1)
    image_id = parts[0]
    if len(parts) == 1 or not parts[1].strip():
        return image_id, []
    boxes = []
    for token in parts[1].split(";"):
        fields = token.split(",")
        if len(fields) != 4:
            raise FormatError(f"box record {token!r} does not have 4 coordinates")
        try:
            x0, y0, x1, y1 = (int(v) for v in fields)
        except ValueError as exc:
            raise FormatError(f"non-integer coordinate in box record {token!r}") from exc
        boxes.append(BoundingBox(x0, y0, x1, y1))
    return image_id, boxes


# ---------------------------------------------------------------------------
# NTX1 named-tensor checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(tensors: Mapping[str, np.ndarray], destination: BinaryIO) -> None:
    """Write named float32 tensors: magic, count, then per tensor the
    length-prefixed UTF-8 name, u32 rank, u32 dims and the binary32 payload."""
    destination.write(CKPT_MAGIC)
    destination.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        encoded = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        destination.write(struct.pack("<I", len(encoded)))
        destination.write(encoded)
        destination.write(struct.pack("<I", arr.ndim))
        destination.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        destination.write(arr.tobytes())


def load_checkpoint(source: BinaryIO) -> dict[str, np.ndarray]:
    magic = _read_exact(source, 4, "checkpoint magic")
    if magic != CKPT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {CKPT_MAGIC!r}")
    (count,) = struct.unpack("<I", _read_exact(source, 4, "checkpoint tensor count"))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", _read_exact(source, 4, "tensor name length"))
        name = _read_exact(source, name_len, "tensor name").decode("utf-8")
        (rank,) = struct.unpack("<I", _read_exact(source, 4, "tensor rank"))
        dims = struct.unpack(f"<{rank}I", _read_exact(source, 4 * rank, "tensor dims"))
        n = int(np.prod(dims)) if rank else 1
        raw = _read_exact(source, 4 * n, f"tensor {name!r} payload")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    if source.read(1):
        raise FormatError("trailing bytes after checkpoint payload")
    return tensors
