"""Desk-scale training ground for the full objective.

A tiny patch encoder, a synthetic shapes-on-texture scene generator and a
plain gradient-descent loop exercising all three loss terms end to end.
Everything is deterministic given the seeds; the whole backward pass is
hand-derived and checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import BinaryIO, Sequence

import numpy as np

from .errors import DataError, UodError
from .formats import load_checkpoint, save_checkpoint
from .losses import (
    LossConfig,
    LossValue,
    NormalizedRect,
    ViewGeometry,
    align_loss_raw,
    bilinear_resample,
    bilinear_resample_adjoint,
    graph_loss,
    info_nce,
    overlap_region,
    total_loss,
)
from .pca import DiscoveryConfig, binarize, discover
from .types import EmbeddingBatch, FeatureMap, ProjectionMap, SegMask
from .weak_labels import weak_labels_from_batch

IMAGE_SIZE = 64
NUM_CLASSES = 4
_SHAPES = ("disc", "square", "triangle", "ring")
_PALETTE = (
    (0.85, 0.20, 0.15),
    (0.20, 0.80, 0.20),
    (0.15, 0.30, 0.85),
    (0.85, 0.80, 0.20),
)


class DivergenceError(UodError):
    kind = "convergence"


@dataclass(frozen=True)
class TrainConfig:
    batch: int = 16
    epochs: int = 30
    lr: float = 7.5e-3
    seed: int = 0
    n_scenes: int = 512
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if self.batch < 2:
            raise DataError(f"batch must be >= 2, got {self.batch}")
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if not (self.lr >= 0.0):
            raise DataError(f"lr must be non-negative, got {self.lr}")
        if self.n_scenes < self.batch:
            raise DataError("need at least one full batch of scenes")


@dataclass(frozen=True)
class SyntheticScene:
    image: np.ndarray  # (3, 64, 64) in [0, 1]
    gt_mask: SegMask
    class_id: int

    def __post_init__(self):
        if self.image.shape != (3, IMAGE_SIZE, IMAGE_SIZE):
            raise DataError(f"scene image must be (3,{IMAGE_SIZE},{IMAGE_SIZE})")
        frac = self.gt_mask.foreground_count() / (IMAGE_SIZE * IMAGE_SIZE)
        if not (0.05 <= frac <= 0.40):
            raise DataError(f"foreground fraction {frac:.3f} outside [0.05, 0.40]")


# ---------------------------------------------------------------------------
# synthetic scenes
# ---------------------------------------------------------------------------

def _smooth_background(rng: np.random.Generator) -> np.ndarray:
    """Large-scale color gradients: low-res noise upsampled bilinearly."""
    coarse = rng.uniform(0.15, 0.85, size=(3, 4, 4))
    up, _ = bilinear_resample(coarse, NormalizedRect(0.0, 0.0, 1.0, 1.0), IMAGE_SIZE, IMAGE_SIZE)
    return up


def _shape_mask(kind: str, rng: np.random.Generator) -> np.ndarray:
    """Rasterize one shape with area in roughly [16%, 35%] of the image."""
    n = IMAGE_SIZE
    frac = rng.uniform(0.16, 0.35)
    total = frac * n * n
    yy, xx = np.mgrid[0:n, 0:n]
    margin = 3
    if kind == "disc":
        r = np.sqrt(total / np.pi)
        cy, cx = rng.uniform(r + margin, n - r - margin, size=2)
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r**2
    if kind == "square":
        a = np.sqrt(total) / 2
        cy, cx = rng.uniform(a + margin, n - a - margin, size=2)
        return (np.abs(yy - cy) <= a) & (np.abs(xx - cx) <= a)
    if kind == "triangle":
        s = np.sqrt(total / 2)
        cy, cx = rng.uniform(s + margin, n - s - margin, size=2)
        # vertices: (cx, cy-s), (cx-s, cy+s), (cx+s, cy+s)
        inside_base = yy <= cy + s
        slope = (yy - (cy - s)) / 2.0
        return inside_base & (np.abs(xx - cx) <= slope) & (yy >= cy - s)
    if kind == "ring":
        r_out = np.sqrt(total / (np.pi * (1 - 0.38**2)))
        r_in = 0.38 * r_out
        cy, cx = rng.uniform(r_out + margin, n - r_out - margin, size=2)
        d2 = (yy - cy) ** 2 + (xx - cx) ** 2
        return (d2 <= r_out**2) & (d2 >= r_in**2)
    raise DataError(f"unknown shape kind {kind!r}")


def gen_synthetic(seed: int, n: int) -> list[SyntheticScene]:
    """Deterministic scene set: smooth random backgrounds, one palette-colored
    shape per scene, foreground area kept between 5% and 40%."""
    if n < 1:
        raise DataError(f"need at least one scene, got {n}")
    streams = np.random.SeedSequence(seed).spawn(n)
    scenes = []
    for stream in streams:
        rng = np.random.Generator(np.random.PCG64(stream))
        class_id = int(rng.integers(0, NUM_CLASSES))
        mask = _shape_mask(_SHAPES[class_id], rng)
        image = _smooth_background(rng)
        color = np.clip(
            np.asarray(_PALETTE[class_id]) + rng.uniform(-0.06, 0.06, size=3), 0.02, 0.98
        )
        speckle = rng.uniform(-0.03, 0.03, size=(3, IMAGE_SIZE, IMAGE_SIZE))
        fg = np.clip(color[:, None, None] + speckle, 0.0, 1.0)
        image = np.where(mask[None, :, :], fg, image)
        scenes.append(
            SyntheticScene(image, SegMask.from_array(mask.astype(np.uint8)), class_id)
        )
    return scenes


def make_view(
    scene: SyntheticScene,
    geometry: ViewGeometry,
    gain: np.ndarray | None = None,
    shift: np.ndarray | None = None,
) -> np.ndarray:
    """Apply a recorded crop/flip (and optional channel jitter) to a scene."""
    n = IMAGE_SIZE
    geometry.check_within(n, n)
    region = NormalizedRect(
        geometry.crop_x / n, geometry.crop_y / n, geometry.crop_w / n, geometry.crop_h / n
    )
    view, _ = bilinear_resample(scene.image, region, n, n)
    if geometry.flip_h:
        view = view[:, :, ::-1].copy()
    if gain is not None or shift is not None:
        g = 1.0 if gain is None else gain[:, None, None]
        s = 0.0 if shift is None else shift[:, None, None]
        view = np.clip(view * g + s, 0.0, 1.0)
    return view


def augment(scene: SyntheticScene, seed: int) -> tuple[np.ndarray, ViewGeometry]:
    """Random square crop (0.4..1.0 of the area), optional horizontal flip and
    mild color jitter; the returned geometry inverts the crop and flip exactly."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n = IMAGE_SIZE
    side = float(np.sqrt(rng.uniform(0.4, 1.0)) * n)
    cx = float(rng.uniform(0.0, n - side))
    cy = float(rng.uniform(0.0, n - side))
    flip = bool(rng.random() < 0.5)
    geometry = ViewGeometry(cx, cy, side, side, flip)
    gain = rng.uniform(0.85, 1.15, size=3)
    shift = rng.uniform(-0.06, 0.06, size=3)
    return make_view(scene, geometry, gain, shift), geometry


# ---------------------------------------------------------------------------
# encoder
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToyEncoder:
    patch_size: int = 8
    embed_dim: int = 16
    hidden_dim: int = 32
    head_dim: int = 16
    params: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if IMAGE_SIZE % self.patch_size != 0:
            raise DataError(f"patch size {self.patch_size} must divide {IMAGE_SIZE}")
        for name, arr in self.params.items():
            if not np.isfinite(arr).all():
                raise DataError(f"parameter {name!r} contains non-finite values")

    @property
    def grid(self) -> int:
        return IMAGE_SIZE // self.patch_size


def _init_params(
    rng: np.random.Generator, patch_size: int, embed_dim: int, hidden_dim: int, head_dim: int
) -> dict[str, np.ndarray]:
    def linear(name: str, out_d: int, in_d: int) -> dict[str, np.ndarray]:
        scale = np.sqrt(2.0 / in_d)
        return {
            f"{name}_w": rng.standard_normal((out_d, in_d)) * scale,
            f"{name}_b": np.zeros(out_d),
        }

    patch_in = 3 * patch_size * patch_size
    params: dict[str, np.ndarray] = {}
    params.update(linear("patch", embed_dim, patch_in))
    params.update(linear("mlp1", hidden_dim, embed_dim))
    params.update(linear("mlp2", embed_dim, hidden_dim))
    for head in ("g", "phi", "eta"):
        params.update(linear(f"{head}1", hidden_dim, embed_dim))
        params.update(linear(f"{head}2", head_dim, hidden_dim))
    return params


def make_encoder(seed: int, patch_size: int = 8, embed_dim: int = 16) -> ToyEncoder:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xE0])))
    hidden, head = 32, 16
    return ToyEncoder(
        patch_size, embed_dim, hidden, head,
        _init_params(rng, patch_size, embed_dim, hidden, head),
    )


def _to_patches(images: np.ndarray, patch: int) -> np.ndarray:
    """(B, 3, H, W) -> (B, grid*grid, 3*patch*patch) in row-major patch order."""
    b, c, h, w = images.shape
    gh, gw = h // patch, w // patch
    x = images.reshape(b, c, gh, patch, gw, patch)
    return x.transpose(0, 2, 4, 1, 3, 5).reshape(b, gh * gw, c * patch * patch)


class _ForwardCache:
    __slots__ = ("patches", "e", "z1", "h1", "x", "pooled",
                 "zg1", "hg", "g_out", "zp1", "hp", "phi_out", "ze1", "he", "eta_out")


def _forward(encoder: ToyEncoder, images: np.ndarray) -> _ForwardCache:
    """Batched forward pass; keeps every pre-activation for the backward pass."""
    p = encoder.params
    cache = _ForwardCache()
    cache.patches = _to_patches(images, encoder.patch_size)  # (B, P, in)
    cache.e = cache.patches @ p["patch_w"].T + p["patch_b"]
    cache.z1 = cache.e @ p["mlp1_w"].T + p["mlp1_b"]
    cache.h1 = np.maximum(cache.z1, 0.0)
    cache.x = cache.h1 @ p["mlp2_w"].T + p["mlp2_b"]  # (B, P, D) dense features
    cache.pooled = cache.x.mean(axis=1)  # (B, D)

    cache.zg1 = cache.pooled @ p["g1_w"].T + p["g1_b"]
    cache.hg = np.maximum(cache.zg1, 0.0)
    cache.g_out = cache.hg @ p["g2_w"].T + p["g2_b"]

    cache.zp1 = cache.pooled @ p["phi1_w"].T + p["phi1_b"]
    cache.hp = np.maximum(cache.zp1, 0.0)
    cache.phi_out = cache.hp @ p["phi2_w"].T + p["phi2_b"]

    cache.ze1 = cache.x @ p["eta1_w"].T + p["eta1_b"]  # (B, P, hidden)
    cache.he = np.maximum(cache.ze1, 0.0)
    cache.eta_out = cache.he @ p["eta2_w"].T + p["eta2_b"]  # (B, P, head)
    return cache


def _backward(
    encoder: ToyEncoder,
    cache: _ForwardCache,
    d_g_out: np.ndarray,
    d_phi_out: np.ndarray,
    d_eta_out: np.ndarray,
    grads: dict[str, np.ndarray],
) -> None:
    """Accumulate parameter gradients for one view's forward pass."""
    p = encoder.params
    patches_per_img = cache.x.shape[1]

    # g head (inputs are (B, D))
    grads["g2_w"] += d_g_out.T @ cache.hg
    grads["g2_b"] += d_g_out.sum(axis=0)
    dhg = (d_g_out @ p["g2_w"]) * (cache.zg1 > 0)
    grads["g1_w"] += dhg.T @ cache.pooled
    grads["g1_b"] += dhg.sum(axis=0)
    d_pooled = dhg @ p["g1_w"]

    # phi head
    grads["phi2_w"] += d_phi_out.T @ cache.hp
    grads["phi2_b"] += d_phi_out.sum(axis=0)
    dhp = (d_phi_out @ p["phi2_w"]) * (cache.zp1 > 0)
    grads["phi1_w"] += dhp.T @ cache.pooled
    grads["phi1_b"] += dhp.sum(axis=0)
    d_pooled = d_pooled + dhp @ p["phi1_w"]

    # eta head (inputs are (B, P, D)); flatten batch and patch axes
    he_flat = cache.he.reshape(-1, cache.he.shape[-1])
    d_eta_flat = d_eta_out.reshape(-1, d_eta_out.shape[-1])
    grads["eta2_w"] += d_eta_flat.T @ he_flat
    grads["eta2_b"] += d_eta_flat.sum(axis=0)
    dhe = (d_eta_out @ p["eta2_w"]) * (cache.ze1 > 0)
    dhe_flat = dhe.reshape(-1, dhe.shape[-1])
    x_flat = cache.x.reshape(-1, cache.x.shape[-1])
    grads["eta1_w"] += dhe_flat.T @ x_flat
    grads["eta1_b"] += dhe_flat.sum(axis=0)
    d_x = dhe @ p["eta1_w"]

    # pooled mean feeds back uniformly into every patch
    d_x = d_x + d_pooled[:, None, :] / patches_per_img

    # backbone
    d_x_flat = d_x.reshape(-1, d_x.shape[-1])
    h1_flat = cache.h1.reshape(-1, cache.h1.shape[-1])
    grads["mlp2_w"] += d_x_flat.T @ h1_flat
    grads["mlp2_b"] += d_x_flat.sum(axis=0)
    dh1 = (d_x @ p["mlp2_w"]) * (cache.z1 > 0)
    dh1_flat = dh1.reshape(-1, dh1.shape[-1])
    e_flat = cache.e.reshape(-1, cache.e.shape[-1])
    grads["mlp1_w"] += dh1_flat.T @ e_flat
    grads["mlp1_b"] += dh1_flat.sum(axis=0)
    de = dh1 @ p["mlp1_w"]
    de_flat = de.reshape(-1, de.shape[-1])
    patches_flat = cache.patches.reshape(-1, cache.patches.shape[-1])
    grads["patch_w"] += de_flat.T @ patches_flat
    grads["patch_b"] += de_flat.sum(axis=0)


def encode(
    encoder: ToyEncoder, image: np.ndarray
) -> tuple[FeatureMap, np.ndarray, np.ndarray, FeatureMap]:
    """Dense backbone grid, pooled projection-head embeddings and the dense
    alignment-head grid for one (3, H, W) image."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise DataError(f"expected a (3, H, W) image, got {image.shape}")
    if image.shape[1] % encoder.patch_size or image.shape[2] % encoder.patch_size:
        raise DataError(
            f"image dims {image.shape[1]}x{image.shape[2]} not divisible by "
            f"patch size {encoder.patch_size}"
        )
    cache = _forward(encoder, image[None])
    grid = image.shape[1] // encoder.patch_size
    dense = FeatureMap.from_array(cache.x[0].T.reshape(encoder.embed_dim, grid, grid))
    dense_eta = FeatureMap.from_array(cache.eta_out[0].T.reshape(encoder.head_dim, grid, grid))
    return dense, cache.g_out[0].copy(), cache.phi_out[0].copy(), dense_eta


# ---------------------------------------------------------------------------
# one training step (shared by the loop and the gradient self-check)
# ---------------------------------------------------------------------------

def _zero_grads(encoder: ToyEncoder) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in encoder.params.items()}


def step_loss_and_grads(
    encoder: ToyEncoder,
    views_a: np.ndarray,
    views_b: np.ndarray,
    geoms_a: Sequence[ViewGeometry],
    geoms_b: Sequence[ViewGeometry],
    cfg: LossConfig,
) -> tuple[LossValue, dict[str, np.ndarray]]:
    """Objective value and parameter gradients for one two-view batch."""
    b = views_a.shape[0]
    grid = encoder.grid
    cache_a = _forward(encoder, views_a)
    cache_b = _forward(encoder, views_b)

    emb_a = EmbeddingBatch.from_array(cache_a.g_out)
    emb_b = EmbeddingBatch.from_array(cache_b.g_out)
    nce = info_nce(emb_a, emb_b, cfg)

    phi_a = EmbeddingBatch.from_array(cache_a.phi_out)
    phi_b = EmbeddingBatch.from_array(cache_b.phi_out)
    labels_a = weak_labels_from_batch(phi_a)
    labels_b = weak_labels_from_batch(phi_b)
    graph = graph_loss(phi_a, phi_b, labels_a, labels_b, cfg)

    # alignment over each pair's overlap, averaged over pairs that overlap
    align_entries = []
    for i in range(b):
        rects = overlap_region(geoms_a[i], geoms_b[i])
        if rects is None:
            continue
        rect_a, rect_b = rects
        eta_a = cache_a.eta_out[i].T.reshape(encoder.head_dim, grid, grid)
        eta_b = cache_b.eta_out[i].T.reshape(encoder.head_dim, grid, grid)
        s_a, cache_res_a = bilinear_resample(eta_a, rect_a, grid, grid)
        s_b, cache_res_b = bilinear_resample(eta_b, rect_b, grid, grid)
        if geoms_a[i].flip_h:
            s_a = s_a[:, :, ::-1]
        if geoms_b[i].flip_h:
            s_b = s_b[:, :, ::-1]
        value, grad_a, grad_b = align_loss_raw(s_a, s_b)
        align_entries.append((i, value, grad_a, grad_b, cache_res_a, cache_res_b))
    if align_entries:
        align_value = float(np.mean([e[1] for e in align_entries]))
    else:
        align_value = 0.0
    align = LossValue(align_value, {})

    combined = total_loss(nce, graph, align, cfg)

    d_eta_a = np.zeros_like(cache_a.eta_out)
    d_eta_b = np.zeros_like(cache_b.eta_out)
    if align_entries:
        scale = cfg.beta / len(align_entries)
        for i, _value, grad_a, grad_b, cache_res_a, cache_res_b in align_entries:
            if geoms_a[i].flip_h:
                grad_a = grad_a[:, :, ::-1]
            if geoms_b[i].flip_h:
                grad_b = grad_b[:, :, ::-1]
            back_a = bilinear_resample_adjoint(grad_a * scale, cache_res_a)
            back_b = bilinear_resample_adjoint(grad_b * scale, cache_res_b)
            d_eta_a[i] = back_a.reshape(encoder.head_dim, -1).T
            d_eta_b[i] = back_b.reshape(encoder.head_dim, -1).T

    grads = _zero_grads(encoder)
    _backward(
        encoder, cache_a,
        combined.gradients["nce.views_a"],
        combined.gradients["graph.v1"],
        d_eta_a,
        grads,
    )
    _backward(
        encoder, cache_b,
        combined.gradients["nce.views_b"],
        combined.gradients["graph.v2"],
        d_eta_b,
        grads,
    )
    return combined, grads


def flatten_params(params: dict[str, np.ndarray]) -> tuple[np.ndarray, list[tuple[str, tuple]]]:
    """Concatenate parameters into one vector plus the layout needed to undo it."""
    layout = [(name, params[name].shape) for name in sorted(params)]
    flat = np.concatenate([params[name].ravel() for name, _ in layout])
    return flat, layout


def unflatten_params(flat: np.ndarray, layout: list[tuple[str, tuple]]) -> dict[str, np.ndarray]:
    out = {}
    offset = 0
    for name, shape in layout:
        size = int(np.prod(shape))
        out[name] = flat[offset : offset + size].reshape(shape).copy()
        offset += size
    return out


# ---------------------------------------------------------------------------
# training loop and evaluation
# ---------------------------------------------------------------------------

def _batch_views(
    scenes: Sequence[SyntheticScene], indices: np.ndarray, rng: np.random.Generator
):
    views_a, views_b, geoms_a, geoms_b = [], [], [], []
    for idx in indices:
        seed_a = int(rng.integers(0, 2**63 - 1))
        seed_b = int(rng.integers(0, 2**63 - 1))
        va, ga = augment(scenes[idx], seed_a)
        vb, gb = augment(scenes[idx], seed_b)
        views_a.append(va)
        views_b.append(vb)
        geoms_a.append(ga)
        geoms_b.append(gb)
    return np.stack(views_a), np.stack(views_b), geoms_a, geoms_b


def train_toy(
    config: TrainConfig = TrainConfig(),
    scenes: Sequence[SyntheticScene] | None = None,
) -> tuple[ToyEncoder, list[float]]:
    """Train the toy encoder on synthetic scenes with plain gradient descent.

    Returns the trained encoder and the per-epoch mean loss trace. Scenes
    default to a deterministic set derived from the training seed.
    """
    root = np.random.SeedSequence(config.seed)
    scene_seed, stream_seed = root.spawn(2)
    if scenes is None:
        scenes = gen_synthetic(int(scene_seed.generate_state(1)[0]), config.n_scenes)
    encoder = make_encoder(config.seed)
    params = {k: v.copy() for k, v in encoder.params.items()}
    encoder = replace(encoder, params=params)

    trace: list[float] = []
    steps_per_epoch = max(1, len(scenes) // config.batch)
    for epoch in range(config.epochs):
        # the view stream restarts every epoch: with lr=0 the trace is exactly flat
        rng = np.random.Generator(np.random.PCG64(stream_seed))
        order = rng.permutation(len(scenes))
        epoch_losses = []
        for step in range(steps_per_epoch):
            indices = order[step * config.batch : (step + 1) * config.batch]
            views_a, views_b, geoms_a, geoms_b = _batch_views(scenes, indices, rng)
            loss, grads = step_loss_and_grads(
                encoder, views_a, views_b, geoms_a, geoms_b, config.loss
            )
            if not np.isfinite(loss.value):
                raise DivergenceError(f"non-finite loss at epoch {epoch} step {step}")
            for name in params:
                params[name] -= config.lr * grads[name]
            epoch_losses.append(loss.value)
        for name, arr in params.items():
            if not np.isfinite(arr).all():
                raise DivergenceError(f"non-finite parameter {name!r} after epoch {epoch}")
        trace.append(float(np.mean(epoch_losses)))
    return encoder, trace


def discovery_mask_for_scene(
    encoder: ToyEncoder, image: np.ndarray, config: DiscoveryConfig = DiscoveryConfig()
) -> SegMask:
    """Patch-level discovery heatmap, bilinearly upsampled to image resolution
    and binarized there. Upsampling the signed heatmap (rather than the blocky
    patch mask) recovers object boundaries below the patch grid."""
    dense, _, _, _ = encode(encoder, image)
    result = discover(dense, config)
    if result.degenerate:
        return SegMask.from_array(np.zeros(image.shape[1:], dtype=np.uint8))
    up, _ = bilinear_resample(
        result.heatmap.values[None], NormalizedRect(0.0, 0.0, 1.0, 1.0),
        image.shape[1], image.shape[2],
    )
    return binarize(ProjectionMap.from_array(up[0]), config.threshold, config.threshold_mode)


def evaluate_toy(
    encoder: ToyEncoder,
    scenes: Sequence[SyntheticScene],
    config: DiscoveryConfig = DiscoveryConfig(),
) -> float:
    """Mean IoU of image-resolution discovery masks vs ground truth."""
    if not scenes:
        raise DataError("no scenes to evaluate")
    ious = []
    for scene in scenes:
        pred = discovery_mask_for_scene(encoder, scene.image, config)
        p = pred.bits.astype(bool)
        g = scene.gt_mask.bits.astype(bool)
        union = int((p | g).sum())
        ious.append(int((p & g).sum()) / union if union else 1.0)
    return float(np.mean(ious))


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_toy_encoder(encoder: ToyEncoder, destination: BinaryIO) -> None:
    tensors = {"meta": np.asarray(
        [encoder.patch_size, encoder.embed_dim, encoder.hidden_dim, encoder.head_dim],
        dtype=np.float32,
    )}
    tensors.update(encoder.params)
    save_checkpoint(tensors, destination)


def load_toy_encoder(source: BinaryIO) -> ToyEncoder:
    tensors = load_checkpoint(source)
    if "meta" not in tensors:
        raise DataError("checkpoint is missing the 'meta' tensor")
    patch, embed, hidden, head = (int(v) for v in tensors.pop("meta"))
    params = {k: v.astype(np.float64) for k, v in tensors.items()}
    return ToyEncoder(patch, embed, hidden, head, params)
