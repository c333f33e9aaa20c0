"""Domain containers shared by the discovery pipeline, the evaluator and the I/O layer.

All containers are immutable after construction and validate their own
invariants. In-memory payloads are float64 so reductions stay tight; the
file formats quantize to binary32 on the way out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


def _require_finite(arr: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise DataError(f"{what} contains a non-finite value at flat index {idx}")


@dataclass(frozen=True)
class FeatureMap:
    """Dense c x h x w feature grid, channel-major."""

    channels: int
    height: int
    width: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.channels < 1 or self.height < 1 or self.width < 1:
            raise DataError(
                f"feature map dims must be positive, got "
                f"c={self.channels} h={self.height} w={self.width}"
            )
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.size != self.channels * self.height * self.width:
            raise DataError(
                f"feature map payload has {arr.size} values, expected "
                f"{self.channels * self.height * self.width}"
            )
        _require_finite(arr, "feature map")
        arr = arr.reshape(self.channels, self.height, self.width)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "FeatureMap":
        arr = np.asarray(arr)
        if arr.ndim != 3:
            raise DataError(f"expected a (c, h, w) array, got shape {arr.shape}")
        c, h, w = arr.shape
        return cls(c, h, w, arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)


@dataclass(frozen=True)
class ProjectionMap:
    """Real-valued h x w heatmap (per-pixel projection values)."""

    height: int
    width: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise DataError(f"heatmap dims must be positive, got {self.height}x{self.width}")
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.size != self.height * self.width:
            raise DataError(
                f"heatmap payload has {arr.size} values, expected {self.height * self.width}"
            )
        _require_finite(arr, "heatmap")
        arr = arr.reshape(self.height, self.width)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ProjectionMap":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise DataError(f"expected a (h, w) array, got shape {arr.shape}")
        return cls(arr.shape[0], arr.shape[1], arr)


@dataclass(frozen=True)
class SegMask:
    """Binary h x w segmentation mask, 1 = foreground."""

    height: int
    width: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise DataError(f"mask dims must be positive, got {self.height}x{self.width}")
        arr = np.ascontiguousarray(self.bits)
        if arr.size != self.height * self.width:
            raise DataError(
                f"mask payload has {arr.size} values, expected {self.height * self.width}"
            )
        if not np.isin(arr, (0, 1)).all():
            raise DataError("mask values must be 0 or 1")
        arr = arr.astype(np.uint8).reshape(self.height, self.width)
        arr.flags.writeable = False
        object.__setattr__(self, "bits", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "SegMask":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise DataError(f"expected a (h, w) array, got shape {arr.shape}")
        return cls(arr.shape[0], arr.shape[1], arr)

    def foreground_count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle in inclusive pixel coordinates, origin top-left."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if min(self.x_min, self.y_min, self.x_max, self.y_max) < 0:
            raise DataError(f"box coordinates must be non-negative: {self}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise DataError(f"box is empty: {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class EmbeddingBatch:
    """N x d matrix of image-level embeddings, rows addressable by index."""

    count: int
    dim: int
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.count < 1 or self.dim < 1:
            raise DataError(f"embedding batch dims must be positive, got N={self.count} d={self.dim}")
        arr = np.ascontiguousarray(self.rows, dtype=np.float64)
        if arr.size != self.count * self.dim:
            raise DataError(
                f"embedding payload has {arr.size} values, expected {self.count * self.dim}"
            )
        _require_finite(arr, "embedding batch")
        arr = arr.reshape(self.count, self.dim)
        arr.flags.writeable = False
        object.__setattr__(self, "rows", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "EmbeddingBatch":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise DataError(f"expected a (N, d) array, got shape {arr.shape}")
        return cls(arr.shape[0], arr.shape[1], arr)
