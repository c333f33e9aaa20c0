"""Feature-statistics object discovery.

Per-image pipeline: channel mean and population covariance of the dense
feature grid, leading eigenvector of the covariance, per-pixel projection
heatmap, deterministic sign resolution, min-max binarization. The video
variant fuses appearance and motion covariances over frame chunks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConvergenceError, DataError
from .types import FeatureMap, ProjectionMap, SegMask

SIGN_RULES = ("border-negative", "none")
THRESHOLD_MODES = ("minmax", "median")

# Matches the quantizer: spreads below this carry no object evidence.
_DEGENERATE_SPAN = 1e-12


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric positive-semidefinite c x c matrix of channel covariances."""

    dim: int
    entries: np.ndarray = field(repr=False)

    _PSD_PROBES = 100

    def __post_init__(self):
        if self.dim < 1:
            raise DataError(f"covariance dim must be positive, got {self.dim}")
        arr = np.ascontiguousarray(self.entries, dtype=np.float64)
        if arr.shape != (self.dim, self.dim):
            arr = arr.reshape(self.dim, self.dim)
        if not np.isfinite(arr).all():
            raise DataError("covariance matrix contains non-finite entries")
        asym = np.abs(arr - arr.T)
        tol = 1e-9 * np.maximum(1.0, np.abs(arr))
        if (asym > tol).any():
            raise DataError("covariance matrix is not symmetric within tolerance")
        # Spot-check semidefiniteness with a fixed bundle of random unit vectors.
        rng = np.random.Generator(np.random.PCG64(0))
        probes = rng.standard_normal((self.dim, self._PSD_PROBES))
        probes /= np.linalg.norm(probes, axis=0, keepdims=True)
        quad = np.einsum("ij,ik,kj->j", probes, arr, probes)
        if (quad < -1e-8 * float(np.trace(arr))).any():
            raise DataError("covariance matrix is not positive semidefinite within tolerance")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)


@dataclass(frozen=True)
class EigenResult:
    """Descending eigenvalues with matching unit-norm eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # row k is the eigenvector for eigenvalues[k]

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=np.float64)
        vecs = np.asarray(self.eigenvectors, dtype=np.float64)
        if (np.diff(vals) > 0).any():
            raise DataError("eigenvalues must be non-increasing")
        norms = np.linalg.norm(vecs, axis=1)
        if (np.abs(norms - 1.0) > 1e-9).any():
            raise DataError("eigenvectors must have unit norm")
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "eigenvectors", vecs)


@dataclass(frozen=True)
class DiscoveryConfig:
    """Knobs of the discovery pipeline; defaults mirror the CLI defaults."""

    eig_index: int = 1
    threshold: float = 0.5
    sign_rule: str = "border-negative"
    threshold_mode: str = "minmax"
    video_lambda1: float = 0.5
    video_lambda2: float = 1.5
    chunk_frames: int = 20

    def __post_init__(self):
        if self.eig_index < 1:
            raise DataError(f"eig_index must be >= 1, got {self.eig_index}")
        if not (0.0 < self.threshold < 1.0):
            raise DataError(f"threshold must lie strictly inside (0,1), got {self.threshold}")
        if self.sign_rule not in SIGN_RULES:
            raise DataError(f"unknown sign rule {self.sign_rule!r}, expected one of {SIGN_RULES}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise DataError(
                f"unknown threshold mode {self.threshold_mode!r}, expected one of {THRESHOLD_MODES}"
            )
        if self.chunk_frames < 1:
            raise DataError(f"chunk_frames must be >= 1, got {self.chunk_frames}")


class DiscoveryResult(NamedTuple):
    heatmap: ProjectionMap
    mask: SegMask
    degenerate: bool


def _pixel_matrix(fmap: FeatureMap) -> np.ndarray:
    """Feature grid as a float64 (c, h*w) matrix of pixel columns."""
    c, h, w = fmap.shape
    return fmap.data.reshape(c, h * w).astype(np.float64)


def mean_vector(fmap: FeatureMap) -> np.ndarray:
    """Channel-wise mean over all h*w pixels; float64 accumulation."""
    return _pixel_matrix(fmap).mean(axis=1)


def covariance(fmap: FeatureMap) -> CovarianceMatrix:
    """Population covariance of the pixel feature vectors (divisor h*w, not h*w - 1)."""
    x = _pixel_matrix(fmap)
    centered = x - x.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / x.shape[1]
    cov = (cov + cov.T) / 2.0
    return CovarianceMatrix(fmap.channels, cov)


def _covariance_of_columns(x: np.ndarray) -> tuple[np.ndarray, CovarianceMatrix]:
    """Mean and population covariance of an already-assembled (c, K) pixel matrix."""
    mean = x.mean(axis=1)
    centered = x - mean[:, None]
    cov = centered @ centered.T / x.shape[1]
    cov = (cov + cov.T) / 2.0
    return mean, CovarianceMatrix(x.shape[0], cov)


def top_eigen(
    matrix: CovarianceMatrix,
    k: int,
    tol: float = 1e-10,
    max_sweeps: int = 64,
) -> EigenResult:
    """Top-k eigenpairs via cyclic Jacobi rotations.

    Sweeps pivots in fixed row-major order, so identical input always yields
    identical output. Convergence is declared when the off-diagonal Frobenius
    norm drops below tol * max(1, ||A||_F).
    """
    n = matrix.dim
    if not (1 <= k <= n):
        raise DataError(f"k must lie in [1, {n}], got {k}")
    a = matrix.entries.copy()
    v = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(a)))

    def off_norm(m: np.ndarray) -> float:
        return float(np.sqrt(np.sum(np.square(m - np.diag(np.diag(m))))))

    converged = n == 1 or off_norm(a) <= tol * scale
    for _ in range(max_sweeps):
        if converged:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vcol_p = v[:, p].copy()
                vcol_q = v[:, q].copy()
                v[:, p] = c * vcol_p - s * vcol_q
                v[:, q] = s * vcol_p + c * vcol_q
        converged = off_norm(a) <= tol * scale
    if not converged:
        raise ConvergenceError(
            f"Jacobi eigensolver did not converge within {max_sweeps} sweeps",
            residual=off_norm(a),
        )

    diag = np.diag(a).copy()
    order = np.argsort(-diag, kind="stable")
    values = diag[order][:k]
    vectors = v[:, order][:, :k].T.copy()
    # Deterministic sign: the largest-magnitude component points positive.
    for row in vectors:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)

    source = matrix.entries
    for lam, vec in zip(values, vectors):
        residual = float(np.linalg.norm(source @ vec - lam * vec))
        if residual > 1e-7 * max(1.0, abs(float(lam))):
            raise ConvergenceError("eigenpair residual above tolerance", residual=residual)
    return EigenResult(values, vectors)


def project(fmap: FeatureMap, mean: np.ndarray, eigvec: np.ndarray) -> ProjectionMap:
    """Per-pixel projection of the centered features onto a unit direction."""
    mean = np.asarray(mean, dtype=np.float64)
    eigvec = np.asarray(eigvec, dtype=np.float64)
    if mean.shape != (fmap.channels,) or eigvec.shape != (fmap.channels,):
        raise DataError(
            f"mean/eigvec must both have length {fmap.channels}, "
            f"got {mean.shape} and {eigvec.shape}"
        )
    x = _pixel_matrix(fmap)
    values = eigvec @ (x - mean[:, None])
    return ProjectionMap(fmap.height, fmap.width, values.reshape(fmap.height, fmap.width))


def resolve_sign(heatmap: ProjectionMap, rule: str = "border-negative") -> ProjectionMap:
    """Orient the heatmap so the image border reads as background.

    With rule ``border-negative`` the map is negated when the mean over the
    1-pixel border is positive. Maps thinner than 3 pixels in either
    dimension are returned unchanged (the border would be the whole image).
    """
    if rule not in SIGN_RULES:
        raise DataError(f"unknown sign rule {rule!r}, expected one of {SIGN_RULES}")
    if rule == "none" or heatmap.height < 3 or heatmap.width < 3:
        return heatmap
    vals = heatmap.values
    border_sum = (
        vals[0, :].sum() + vals[-1, :].sum() + vals[1:-1, 0].sum() + vals[1:-1, -1].sum()
    )
    border_count = 2 * heatmap.width + 2 * (heatmap.height - 2)
    if border_sum / border_count > 0.0:
        return ProjectionMap(heatmap.height, heatmap.width, -vals)
    return heatmap


def binarize(heatmap: ProjectionMap, threshold: float, mode: str = "minmax") -> SegMask:
    """Threshold the heatmap into a binary mask.

    ``minmax`` normalizes to [0,1] first (an all-equal map binarizes to all
    background); ``median`` cuts at the value quantile given by threshold.
    """
    if not (0.0 < threshold < 1.0):
        raise DataError(f"threshold must lie strictly inside (0,1), got {threshold}")
    if mode not in THRESHOLD_MODES:
        raise DataError(f"unknown threshold mode {mode!r}, expected one of {THRESHOLD_MODES}")
    vals = heatmap.values
    if mode == "median":
        cut = float(np.quantile(vals, threshold))
        bits = (vals >= cut).astype(np.uint8)
        return SegMask(heatmap.height, heatmap.width, bits)
    lo = float(vals.min())
    hi = float(vals.max())
    if hi - lo < _DEGENERATE_SPAN:
        return SegMask(heatmap.height, heatmap.width, np.zeros(vals.shape, dtype=np.uint8))
    norm = (vals - lo) / (hi - lo)
    return SegMask(heatmap.height, heatmap.width, (norm >= threshold).astype(np.uint8))


def _selected_direction(cov: CovarianceMatrix, eig_index: int) -> tuple[float, np.ndarray]:
    pairs = top_eigen(cov, k=eig_index)
    return float(pairs.eigenvalues[eig_index - 1]), pairs.eigenvectors[eig_index - 1]


def _is_degenerate(selected_eigenvalue: float, energy: float) -> bool:
    return selected_eigenvalue <= 1e-12 * (energy + 1e-300)


def discover(fmap: FeatureMap, config: DiscoveryConfig = DiscoveryConfig()) -> DiscoveryResult:
    """Full per-image pipeline: mean, covariance, eigenvector, heatmap, mask.

    A (near-)zero covariance yields an all-background mask with the
    degenerate flag set.
    """
    if config.eig_index > fmap.channels:
        raise DataError(
            f"eig_index {config.eig_index} exceeds channel count {fmap.channels}"
        )
    x = _pixel_matrix(fmap)
    mean, cov = _covariance_of_columns(x)
    lam, direction = _selected_direction(cov, config.eig_index)
    if _is_degenerate(lam, float(np.mean(np.square(x)))):
        zeros = np.zeros((fmap.height, fmap.width))
        return DiscoveryResult(
            ProjectionMap(fmap.height, fmap.width, zeros),
            SegMask(fmap.height, fmap.width, zeros.astype(np.uint8)),
            True,
        )
    heatmap = resolve_sign(project(fmap, mean, direction), config.sign_rule)
    mask = binarize(heatmap, config.threshold, config.threshold_mode)
    return DiscoveryResult(heatmap, mask, False)


def fuse_covariances(
    a: CovarianceMatrix, b: CovarianceMatrix, lambda1: float, lambda2: float
) -> CovarianceMatrix:
    """Entrywise weighted sum lambda1*A + lambda2*B."""
    if a.dim != b.dim:
        raise DataError(f"covariance dims differ: {a.dim} vs {b.dim}")
    return CovarianceMatrix(a.dim, lambda1 * a.entries + lambda2 * b.entries)


def video_discover(
    rgb_frames: Sequence[FeatureMap],
    flow_frames: Sequence[FeatureMap],
    config: DiscoveryConfig = DiscoveryConfig(),
) -> list[SegMask]:
    """Chunked video variant.

    Frames are processed in consecutive chunks of ``chunk_frames``. Within a
    chunk the appearance and motion covariances are computed over the pixels
    of all chunk frames pooled together, fused with the configured weights,
    and the resulting direction plus the pooled appearance mean project every
    frame of the chunk. Sign resolution and binarization happen per frame.
    """
    if len(rgb_frames) != len(flow_frames):
        raise DataError(
            f"frame lists differ in length: {len(rgb_frames)} rgb vs {len(flow_frames)} flow"
        )
    if not rgb_frames:
        raise DataError("empty frame sequence")
    shape = rgb_frames[0].shape
    for kind, frames in (("rgb", rgb_frames), ("flow", flow_frames)):
        for i, frame in enumerate(frames):
            if frame.shape != shape:
                raise DataError(
                    f"{kind} frame {i} has shape {frame.shape}, expected {shape}"
                )
    if config.eig_index > shape[0]:
        raise DataError(f"eig_index {config.eig_index} exceeds channel count {shape[0]}")

    masks: list[SegMask] = []
    step = config.chunk_frames
    for start in range(0, len(rgb_frames), step):
        rgb_chunk = rgb_frames[start : start + step]
        flow_chunk = flow_frames[start : start + step]
        rgb_cols = np.concatenate([_pixel_matrix(f) for f in rgb_chunk], axis=1)
        flow_cols = np.concatenate([_pixel_matrix(f) for f in flow_chunk], axis=1)
        rgb_mean, rgb_cov = _covariance_of_columns(rgb_cols)
        _, flow_cov = _covariance_of_columns(flow_cols)
        fused = fuse_covariances(rgb_cov, flow_cov, config.video_lambda1, config.video_lambda2)
        lam, direction = _selected_direction(fused, config.eig_index)
        degenerate = _is_degenerate(
            lam, float(np.mean(np.square(rgb_cols))) + float(np.mean(np.square(flow_cols)))
        )
        for frame in rgb_chunk:
            if degenerate:
                masks.append(
                    SegMask(frame.height, frame.width,
                            np.zeros((frame.height, frame.width), dtype=np.uint8))
                )
                continue
            heat = resolve_sign(project(frame, rgb_mean, direction), config.sign_rule)
            masks.append(binarize(heat, config.threshold, config.threshold_mode))
    return masks
