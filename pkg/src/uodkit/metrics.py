"""Segmentation and localization metric suite plus the dataset harness."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import boxes as boxes_mod
from .errors import DataError, HarnessError
from .formats import load_heatmap, load_mask
from .pca import binarize
from .types import BoundingBox, ProjectionMap, SegMask

F_MEASURE_BETA_SQ = 0.3
MASK_THRESHOLD = 0.5
_THRESHOLDS = np.arange(255) / 255.0


@dataclass(frozen=True)
class EvalOptions:
    beta_sq: float = F_MEASURE_BETA_SQ
    threshold: float = MASK_THRESHOLD

    def __post_init__(self):
        if self.beta_sq <= 0:
            raise DataError(f"beta_sq must be positive, got {self.beta_sq}")
        if not (0.0 < self.threshold < 1.0):
            raise DataError(f"threshold must lie strictly inside (0,1), got {self.threshold}")


@dataclass(frozen=True)
class MetricsReport:
    f_beta_max: float
    iou: float
    accuracy: float
    jaccard: float
    corloc: float
    n_images: int

    def __post_init__(self):
        for name in ("f_beta_max", "iou", "accuracy", "jaccard", "corloc"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DataError(f"metric {name} out of [0,1]: {v}")


def render_report(report: MetricsReport) -> str:
    """Fixed-order text block, one 'name: value' line per metric, 4 decimals."""
    lines = [
        f"f_beta_max: {report.f_beta_max:.4f}",
        f"iou: {report.iou:.4f}",
        f"accuracy: {report.accuracy:.4f}",
        f"jaccard: {report.jaccard:.4f}",
        f"corloc: {report.corloc:.4f}",
        f"n_images: {report.n_images}",
    ]
    return "\n".join(lines) + "\n"


def _normalize(values: np.ndarray) -> np.ndarray:
    lo = float(values.min())
    hi = float(values.max())
    if hi - lo < 1e-12:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def f_beta_max(
    heatmap: ProjectionMap, gt: SegMask, beta_sq: float = F_MEASURE_BETA_SQ
) -> float:
    """Maximum weighted F-measure over 255 uniform binarization thresholds.

    The heatmap is min-max normalized first; a prediction empty at some
    threshold scores precision 1 and recall 0 there. An empty ground truth
    yields 0 (the harness skips images where the prediction is empty too).
    """
    if (heatmap.height, heatmap.width) != (gt.height, gt.width):
        raise DataError(
            f"heatmap {heatmap.height}x{heatmap.width} does not match "
            f"mask {gt.height}x{gt.width}"
        )
    gt_count = gt.foreground_count()
    if gt_count == 0:
        return 0.0
    norm = _normalize(heatmap.values).ravel()
    truth = gt.bits.ravel().astype(bool)
    best = 0.0
    for t in _THRESHOLDS:
        pred = norm > t
        pred_count = int(pred.sum())
        tp = int((pred & truth).sum())
        precision = tp / pred_count if pred_count else 1.0
        recall = tp / gt_count
        denom = beta_sq * precision + recall
        f = (1.0 + beta_sq) * precision * recall / denom if denom > 0 else 0.0
        best = max(best, f)
    return best


def mask_iou_accuracy(pred: SegMask, gt: SegMask) -> tuple[float, float]:
    """Pixel IoU (both-empty convention: 1.0) and pixel accuracy."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise DataError(
            f"prediction {pred.height}x{pred.width} does not match "
            f"ground truth {gt.height}x{gt.width}"
        )
    p = pred.bits.astype(bool)
    g = gt.bits.astype(bool)
    union = int((p | g).sum())
    inter = int((p & g).sum())
    iou = inter / union if union else 1.0
    accuracy = float((p == g).mean())
    return iou, accuracy


def _gt_boxes(gt: SegMask) -> list[BoundingBox]:
    """One tight rectangle per 8-connected ground-truth region."""
    if gt.foreground_count() == 0:
        return []
    comps = boxes_mod.connected_components_8(gt)
    out = []
    for comp_id in range(1, comps.count + 1):
        region = comps.labels == comp_id
        rows = np.flatnonzero(region.any(axis=1))
        cols = np.flatnonzero(region.any(axis=0))
        out.append(BoundingBox(int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1])))
    return out


def evaluate_pairs(
    items: Sequence[tuple[str, ProjectionMap, SegMask]],
    options: EvalOptions = EvalOptions(),
) -> MetricsReport:
    """Aggregate per-image metrics over (stem, predicted heatmap, gt mask) triples.

    Per-image values are combined by arithmetic mean in the given order.
    Images whose ground truth and prediction are both empty are skipped;
    images with empty ground truth are excluded from the CorLoc denominator.
    """
    if not items:
        raise HarnessError("no image pairs to evaluate")
    f_scores: list[float] = []
    ious: list[float] = []
    accs: list[float] = []
    pred_boxes: list[list[BoundingBox]] = []
    gt_boxes: list[list[BoundingBox]] = []
    for stem, heat, gt in items:
        pred_mask = binarize(heat, options.threshold)
        if gt.foreground_count() == 0 and pred_mask.foreground_count() == 0:
            continue
        f_scores.append(f_beta_max(heat, gt, options.beta_sq))
        iou, acc = mask_iou_accuracy(pred_mask, gt)
        ious.append(iou)
        accs.append(acc)
        pred_boxes.append(boxes_mod.generate_boxes(pred_mask))
        gt_boxes.append(_gt_boxes(gt))
    if not f_scores:
        raise HarnessError("every image pair was empty on both sides")
    mean_iou = float(np.mean(ious))
    return MetricsReport(
        f_beta_max=float(np.mean(f_scores)),
        iou=mean_iou,
        accuracy=float(np.mean(accs)),
        jaccard=mean_iou,
        corloc=boxes_mod.corloc(pred_boxes, gt_boxes),
        n_images=len(f_scores),
    )


def pair_stems(pred_dir: Path, gt_dir: Path, suffix: str = ".pgm") -> list[str]:
    """Match files across the two directories by stem; mismatches are fatal."""
    pred_stems = {p.stem for p in pred_dir.glob(f"*{suffix}")}
    gt_stems = {p.stem for p in gt_dir.glob(f"*{suffix}")}
    missing_gt = sorted(pred_stems - gt_stems)
    missing_pred = sorted(gt_stems - pred_stems)
    if missing_gt or missing_pred:
        parts = []
        if missing_gt:
            parts.append(f"no ground truth for: {', '.join(missing_gt)}")
        if missing_pred:
            parts.append(f"no prediction for: {', '.join(missing_pred)}")
        raise HarnessError("; ".join(parts))
    if not pred_stems:
        raise HarnessError(f"no {suffix} files found in {pred_dir} and {gt_dir}")
    return sorted(pred_stems)


def eval_dataset(
    pred_dir: str | Path, gt_dir: str | Path, options: EvalOptions = EvalOptions()
) -> MetricsReport:
    """Directory harness: predicted heatmap PGMs vs ground-truth mask PGMs."""
    pred_dir = Path(pred_dir)
    gt_dir = Path(gt_dir)
    items = []
    for stem in pair_stems(pred_dir, gt_dir):
        with open(pred_dir / f"{stem}.pgm", "rb") as fh:
            heat = load_heatmap(fh)
        with open(gt_dir / f"{stem}.pgm", "rb") as fh:
            gt = load_mask(fh)
        items.append((stem, heat, gt))
    return evaluate_pairs(items, options)
