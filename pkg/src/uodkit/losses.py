"""Contrastive training objective with exact hand-derived gradients.

Four losses: instance-discrimination over pooled two-view batches, the
weak-label supervised contrastive loss, its view-swapped combination, and
the pixel-level alignment loss over resampled view overlaps. Each returns
its value together with gradients for every differentiable input, verified
against central finite differences. No autodiff framework is involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import DataError, DegenerateEmbeddingError
from .types import EmbeddingBatch, FeatureMap
from .weak_labels import WeakLabelMatrix

_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class LossConfig:
    """Temperature and objective mixing weights."""

    tau: float = 0.1
    alpha: float = 5.0
    beta: float = 1.0

    def __post_init__(self):
        if not (self.tau > 0.0):
            raise DataError(f"temperature must be positive, got {self.tau}")


@dataclass(frozen=True)
class LossValue:
    """A scalar loss plus one gradient array per differentiable input."""

    value: float
    gradients: dict[str, np.ndarray]

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise DataError(f"loss value is not finite: {self.value}")


# ---------------------------------------------------------------------------
# cosine-similarity forward/backward shared by the embedding losses
# ---------------------------------------------------------------------------

def _normalized_rows(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(z, axis=1)
    weak = np.flatnonzero(norms <= _NORM_FLOOR)
    if weak.size:
        raise DegenerateEmbeddingError(int(weak[0]))
    return z / norms[:, None], norms


def _similarity_backward(
    grad_sim: np.ndarray, unit: np.ndarray, norms: np.ndarray
) -> np.ndarray:
    """Pull a dLoss/dS matrix (zero diagonal) back to the raw embedding rows."""
    grad_unit = (grad_sim + grad_sim.T) @ unit
    radial = np.sum(grad_unit * unit, axis=1, keepdims=True)
    return (grad_unit - radial * unit) / norms[:, None]


def _row_softmax_stats(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row log-sum-exp and softmax weights, with the diagonal excluded."""
    masked = logits.copy()
    np.fill_diagonal(masked, -np.inf)
    row_max = masked.max(axis=1, keepdims=True)
    lse = row_max + np.log(np.sum(np.exp(masked - row_max), axis=1, keepdims=True))
    weights = np.exp(masked - lse)
    return lse[:, 0], weights


# ---------------------------------------------------------------------------
# instance discrimination over the pooled two-view batch
# ---------------------------------------------------------------------------

def info_nce(views_a: EmbeddingBatch, views_b: EmbeddingBatch, cfg: LossConfig) -> LossValue:
    """Two-view instance-discrimination loss.

    The 2N embeddings of both views are pooled; every embedding serves as an
    anchor whose positive is its counterpart view, and the denominator runs
    over the remaining 2N-1 pooled embeddings. Returns the mean over all 2N
    anchors and gradients for both input batches.
    """
    if views_a.count != views_b.count or views_a.dim != views_b.dim:
        raise DataError(
            f"view batches must agree in shape, got {views_a.count}x{views_a.dim} "
            f"and {views_b.count}x{views_b.dim}"
        )
    n = views_a.count
    unit_a, norms_a = _normalized_rows(views_a.rows)
    unit_b, norms_b = _normalized_rows(views_b.rows)
    unit = np.vstack([unit_a, unit_b])
    norms = np.concatenate([norms_a, norms_b])
    sim = unit @ unit.T
    logits = sim / cfg.tau
    lse, weights = _row_softmax_stats(logits)

    anchors = np.arange(2 * n)
    positives = np.where(anchors < n, anchors + n, anchors - n)
    value = float(np.mean(lse - logits[anchors, positives]))

    grad_sim = weights.copy()
    grad_sim[anchors, positives] -= 1.0
    grad_sim /= 2 * n * cfg.tau
    grad_pooled = _similarity_backward(grad_sim, unit, norms)
    return LossValue(value, {"views_a": grad_pooled[:n], "views_b": grad_pooled[n:]})


# ---------------------------------------------------------------------------
# weak-label supervised contrastive loss and its swapped combination
# ---------------------------------------------------------------------------

def sup_contrastive(v: EmbeddingBatch, y: WeakLabelMatrix, cfg: LossConfig) -> LossValue:
    """Contrastive loss that attracts every pair sharing a weak label.

    Each labeled pair contributes the negative log-probability of picking
    its partner against all other batch members; the result is the mean of
    the per-anchor sums.
    """
    if y.n != v.count:
        raise DataError(f"label matrix is {y.n}x{y.n} but batch has {v.count} rows")
    n = v.count
    unit, norms = _normalized_rows(v.rows)
    sim = unit @ unit.T
    logits = sim / cfg.tau
    lse, weights = _row_softmax_stats(logits)

    labels = y.y.astype(np.float64)
    per_anchor = np.sum(labels * (lse[:, None] - logits), axis=1)
    value = float(np.mean(per_anchor))

    positives_per_anchor = labels.sum(axis=1, keepdims=True)
    grad_sim = (positives_per_anchor * weights - labels) / (n * cfg.tau)
    np.fill_diagonal(grad_sim, 0.0)
    return LossValue(value, {"v": _similarity_backward(grad_sim, unit, norms)})


def graph_loss(
    v1: EmbeddingBatch,
    v2: EmbeddingBatch,
    y1: WeakLabelMatrix,
    y2: WeakLabelMatrix,
    cfg: LossConfig,
) -> LossValue:
    """Swapped-label combination: view 1 supervised by view 2's labels and vice versa."""
    first = sup_contrastive(v1, y2, cfg)
    second = sup_contrastive(v2, y1, cfg)
    return LossValue(
        first.value + second.value,
        {"v1": first.gradients["v"], "v2": second.gradients["v"]},
    )


# ---------------------------------------------------------------------------
# view geometry and the overlap machinery feeding the alignment loss
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ViewGeometry:
    """Crop-and-flip record of one augmented view, in original-image pixels."""

    crop_x: float
    crop_y: float
    crop_w: float
    crop_h: float
    flip_h: bool = False

    def __post_init__(self):
        if self.crop_x < 0 or self.crop_y < 0:
            raise DataError(f"crop origin must be non-negative: ({self.crop_x}, {self.crop_y})")
        if self.crop_w <= 0 or self.crop_h <= 0:
            raise DataError(f"crop size must be positive: {self.crop_w}x{self.crop_h}")

    def check_within(self, image_w: float, image_h: float) -> None:
        if self.crop_x + self.crop_w > image_w + 1e-9 or self.crop_y + self.crop_h > image_h + 1e-9:
            raise DataError(
                f"crop ({self.crop_x},{self.crop_y},{self.crop_w},{self.crop_h}) "
                f"exceeds image bounds {image_w}x{image_h}"
            )


class NormalizedRect(NamedTuple):
    """Axis-aligned rectangle in a view's [0,1]^2 coordinate frame."""

    x: float
    y: float
    w: float
    h: float


def overlap_region(
    g_i: ViewGeometry, g_j: ViewGeometry
) -> Optional[tuple[NormalizedRect, NormalizedRect]]:
    """Intersection of two crops, expressed in each view's own normalized frame.

    Returns None when the crops do not overlap. Horizontal flips are undone,
    so corresponding normalized rectangles always describe the same region
    of the original image.
    """
    x0 = max(g_i.crop_x, g_j.crop_x)
    y0 = max(g_i.crop_y, g_j.crop_y)
    x1 = min(g_i.crop_x + g_i.crop_w, g_j.crop_x + g_j.crop_w)
    y1 = min(g_i.crop_y + g_i.crop_h, g_j.crop_y + g_j.crop_h)
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        return None

    def to_view(g: ViewGeometry) -> NormalizedRect:
        nx0 = (x0 - g.crop_x) / g.crop_w
        nx1 = (x1 - g.crop_x) / g.crop_w
        ny0 = (y0 - g.crop_y) / g.crop_h
        ny1 = (y1 - g.crop_y) / g.crop_h
        if g.flip_h:
            nx0, nx1 = 1.0 - nx1, 1.0 - nx0
        return NormalizedRect(nx0, ny0, nx1 - nx0, ny1 - ny0)

    return to_view(g_i), to_view(g_j)


class _ResampleCache(NamedTuple):
    y0: np.ndarray
    x0: np.ndarray
    ty: np.ndarray
    tx: np.ndarray
    in_h: int
    in_w: int


def _axis_coords(origin: float, extent: float, out_n: int, in_n: int):
    """Clamped sample coordinates for one axis under half-pixel-center sampling."""
    centers = (origin + (np.arange(out_n) + 0.5) / out_n * extent) * in_n - 0.5
    if in_n == 1:
        return np.zeros(out_n, dtype=np.int64), np.zeros(out_n)
    clamped = np.clip(centers, 0.0, in_n - 1.0)
    low = np.minimum(np.floor(clamped), in_n - 2).astype(np.int64)
    return low, clamped - low


def bilinear_resample(
    data: np.ndarray, region: NormalizedRect, out_h: int, out_w: int
) -> tuple[np.ndarray, _ResampleCache]:
    """Bilinearly sample a (c, h, w) array over a normalized region.

    Output cell centers map to continuous input coordinates; samples falling
    outside the grid clamp to the border. Returns the cache needed by the
    exact adjoint.
    """
    c, in_h, in_w = data.shape
    y0, ty = _axis_coords(region.y, region.h, out_h, in_h)
    x0, tx = _axis_coords(region.x, region.w, out_w, in_w)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = ty[:, None]
    wx = tx[None, :]
    out = (
        (1 - wy) * (1 - wx) * data[:, y0[:, None], x0[None, :]]
        + (1 - wy) * wx * data[:, y0[:, None], x1[None, :]]
        + wy * (1 - wx) * data[:, y1[:, None], x0[None, :]]
        + wy * wx * data[:, y1[:, None], x1[None, :]]
    )
    return out, _ResampleCache(y0, x0, ty, tx, in_h, in_w)


def bilinear_resample_adjoint(grad_out: np.ndarray, cache: _ResampleCache) -> np.ndarray:
    """Exact transpose of bilinear_resample: scatter-add output gradients."""
    c = grad_out.shape[0]
    y0, x0, ty, tx = cache.y0, cache.x0, cache.ty, cache.tx
    y1 = np.minimum(y0 + 1, cache.in_h - 1)
    x1 = np.minimum(x0 + 1, cache.in_w - 1)
    wy = ty[:, None]
    wx = tx[None, :]
    grad_in = np.zeros((cache.in_h * cache.in_w, c))
    flat = grad_out.reshape(c, -1).T  # (out_h*out_w, c)
    for rows, cols, weight in (
        (y0, x0, (1 - wy) * (1 - wx)),
        (y0, x1, (1 - wy) * wx),
        (y1, x0, wy * (1 - wx)),
        (y1, x1, wy * wx),
    ):
        idx = (rows[:, None] * cache.in_w + cols[None, :]).ravel()
        np.add.at(grad_in, idx, flat * weight.ravel()[:, None])
    return grad_in.T.reshape(c, cache.in_h, cache.in_w)


def resample_region(
    fmap: FeatureMap, region: NormalizedRect, out_h: int, out_w: int
) -> FeatureMap:
    """Crop-and-rescale a feature map to a fixed grid over a normalized region."""
    if out_h < 1 or out_w < 1:
        raise DataError(f"output dims must be positive, got {out_h}x{out_w}")
    # 1e-9 slack: overlap rectangles carry float rounding from the crop inversion
    if not (region.x >= -1e-9 and region.y >= -1e-9
            and region.x + region.w <= 1.0 + 1e-9 and region.y + region.h <= 1.0 + 1e-9
            and region.w > 0 and region.h > 0):
        raise DataError(f"region must be a non-empty rectangle inside [0,1]^2: {region}")
    out, _ = bilinear_resample(fmap.data.astype(np.float64), region, out_h, out_w)
    return FeatureMap(fmap.channels, out_h, out_w, out)


# ---------------------------------------------------------------------------
# pixel alignment loss
# ---------------------------------------------------------------------------

def _channel_softmax(raw: np.ndarray) -> np.ndarray:
    shifted = raw - raw.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def align_loss_raw(u: np.ndarray, v: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """align_loss on raw (c, h, w) float arrays; returns (value, grad_u, grad_v)."""
    c, h, w = u.shape
    a = _channel_softmax(u)
    b = _channel_softmax(v)
    log_a = np.log(a)
    log_b = np.log(b)
    ce_ij = -np.sum(a * log_b, axis=0)
    ce_ji = -np.sum(b * log_a, axis=0)
    scale = 1.0 / (c * h * w)
    value = float(np.sum(ce_ij + ce_ji) * scale)
    grad_u = (-a * (log_b + ce_ij[None, :, :]) + (a - b)) * scale
    grad_v = (-b * (log_a + ce_ji[None, :, :]) + (b - a)) * scale
    return value, grad_u, grad_v


def align_loss(s_i: FeatureMap, s_j: FeatureMap) -> LossValue:
    """Symmetric per-pixel cross-entropy between channel distributions.

    Each pixel's feature vector becomes a distribution over channels via
    exponential normalization; the loss averages CE in both directions with
    a 1/(c*h*w) prefactor. With a single channel the loss is identically 0.
    """
    if s_i.shape != s_j.shape:
        raise DataError(f"feature maps must agree in shape: {s_i.shape} vs {s_j.shape}")
    value, grad_u, grad_v = align_loss_raw(
        s_i.data.astype(np.float64), s_j.data.astype(np.float64)
    )
    return LossValue(value, {"s_i": grad_u, "s_j": grad_v})


# ---------------------------------------------------------------------------
# total objective and the finite-difference oracle
# ---------------------------------------------------------------------------

def total_loss(nce: LossValue, graph: LossValue, align: LossValue, cfg: LossConfig) -> LossValue:
    """Weighted combination of the three objective terms.

    Gradients are namespaced by term and scaled with the same coefficients
    as the values.
    """
    value = nce.value + cfg.alpha * graph.value + cfg.beta * align.value
    gradients: dict[str, np.ndarray] = {}
    for prefix, term, coeff in (
        ("nce", nce, 1.0),
        ("graph", graph, cfg.alpha),
        ("align", align, cfg.beta),
    ):
        for key, arr in term.gradients.items():
            gradients[f"{prefix}.{key}"] = coeff * arr
    return LossValue(value, gradients)


def numeric_gradient(
    loss_fn: Callable[[np.ndarray], float], point: np.ndarray, h: float = 1e-4
) -> np.ndarray:
    """Central-difference gradient of a black-box scalar loss; float64 throughout."""
    if not (h > 0.0):
        raise DataError(f"step size must be positive, got {h}")
    point = np.asarray(point, dtype=np.float64)
    grad = np.empty(point.size)
    flat = point.ravel().copy()
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        up = float(loss_fn(flat.reshape(point.shape)))
        flat[k] = orig - h
        down = float(loss_fn(flat.reshape(point.shape)))
        flat[k] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise DataError(f"loss is not finite near probe coordinate {k}")
        grad[k] = (up - down) / (2.0 * h)
    return grad.reshape(point.shape)
