"""Bounding-box generation from binary masks and box-level localization scoring."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, HarnessError
from .types import BoundingBox, SegMask

MIN_AREA_FRAC = 0.0025
DEDUP_IOU = 0.7
CORLOC_IOU = 0.5


@dataclass(frozen=True)
class ComponentMap:
    """Dense component labels (0 = background) plus per-component pixel counts."""

    labels: np.ndarray = field(repr=False)
    areas: tuple[int, ...] = ()

    def __post_init__(self):
        arr = np.asarray(self.labels, dtype=np.int64)
        if arr.ndim != 2:
            raise DataError(f"labels must be 2-D, got shape {arr.shape}")
        if sum(self.areas) != int((arr > 0).sum()):
            raise DataError("component areas must sum to the foreground pixel count")
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)

    @property
    def count(self) -> int:
        return len(self.areas)


def connected_components_8(mask: SegMask) -> ComponentMap:
    """Label maximal 8-connected foreground regions.

    Two-pass union-find sweep; final ids are dense 1..K in order of first
    raster-scan occurrence.
    """
    h, w = mask.height, mask.width
    bits = mask.bits
    provisional = np.zeros((h, w), dtype=np.int64)
    parent: list[int] = [0]  # index 0 unused (background)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    next_label = 1
    for r in range(h):
        for c in range(w):
            if not bits[r, c]:
                continue
            neighbours = []
            if r > 0:
                if c > 0 and bits[r - 1, c - 1]:
                    neighbours.append(provisional[r - 1, c - 1])
                if bits[r - 1, c]:
                    neighbours.append(provisional[r - 1, c])
                if c + 1 < w and bits[r - 1, c + 1]:
                    neighbours.append(provisional[r - 1, c + 1])
            if c > 0 and bits[r, c - 1]:
                neighbours.append(provisional[r, c - 1])
            if not neighbours:
                parent.append(next_label)
                provisional[r, c] = next_label
                next_label += 1
            else:
                target = min(find(int(n)) for n in neighbours)
                provisional[r, c] = target
                for n in neighbours:
                    root = find(int(n))
                    if root != target:
                        parent[root] = target

    remap: dict[int, int] = {}
    labels = np.zeros((h, w), dtype=np.int64)
    areas: list[int] = []
    for r in range(h):
        for c in range(w):
            p = int(provisional[r, c])
            if p == 0:
                continue
            root = find(p)
            if root not in remap:
                remap[root] = len(remap) + 1
                areas.append(0)
            labels[r, c] = remap[root]
            areas[remap[root] - 1] += 1
    return ComponentMap(labels, tuple(areas))


def _tight_box(region: np.ndarray) -> BoundingBox:
    rows = np.flatnonzero(region.any(axis=1))
    cols = np.flatnonzero(region.any(axis=0))
    return BoundingBox(int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1]))


def generate_boxes(
    mask: SegMask,
    min_area_frac: float = MIN_AREA_FRAC,
    dedup_iou: float = DEDUP_IOU,
) -> list[BoundingBox]:
    """Box proposals from a segmentation mask.

    Procedure: (1) split the foreground into 8-connected components;
    (2) drop components covering less than min_area_frac of the image;
    (3) drop components whose pixel IoU with the complete foreground exceeds
    dedup_iou (for a component this is its area over the foreground area);
    (4) emit the tight rectangle of every surviving component plus the tight
    rectangle of the whole foreground, with exact duplicates removed.
    """
    foreground = int(mask.bits.sum())
    if foreground == 0:
        return []
    comps = connected_components_8(mask)
    area_cut = min_area_frac * mask.height * mask.width
    boxes: list[BoundingBox] = []
    for comp_id, area in enumerate(comps.areas, start=1):
        if area < area_cut:
            continue
        if area / foreground > dedup_iou:
            continue
        boxes.append(_tight_box(comps.labels == comp_id))
    boxes.append(_tight_box(mask.bits > 0))
    deduped: list[BoundingBox] = []
    for box in boxes:
        if box not in deduped:
            deduped.append(box)
    return deduped


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union with inclusive pixel areas."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min) + 1
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min) + 1
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def corloc(
    predictions: Sequence[Sequence[BoundingBox]],
    ground_truth: Sequence[Sequence[BoundingBox]],
    iou_threshold: float = CORLOC_IOU,
) -> float:
    """Fraction of images where some predicted box overlaps some ground-truth
    box with IoU strictly above the threshold. Images without ground truth
    are excluded from the denominator."""
    if len(predictions) != len(ground_truth):
        raise HarnessError(
            f"prediction and ground-truth sets differ: {len(predictions)} vs {len(ground_truth)}"
        )
    scored = 0
    hits = 0
    for pred_boxes, gt_boxes in zip(predictions, ground_truth):
        if not gt_boxes:
            continue
        scored += 1
        if any(box_iou(p, g) > iou_threshold for p in pred_boxes for g in gt_boxes):
            hits += 1
    return hits / scored if scored else 0.0
