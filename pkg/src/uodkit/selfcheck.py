"""Built-in oracle suites, runnable post-install via the selfcheck command.

Each suite re-derives expected values with an independent method (dense
eigensolver, depth-first search, flood fill, finite differences, explicit
brute force) and checks the shipped implementation against it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import boxes as boxes_mod
from . import pca
from .formats import fmap_from_bytes, fmap_to_bytes, mask_from_bytes, mask_to_bytes
from .losses import (
    LossConfig,
    align_loss,
    graph_loss,
    info_nce,
    numeric_gradient,
    sup_contrastive,
)
from .metrics import f_beta_max, mask_iou_accuracy
from .types import BoundingBox, EmbeddingBatch, FeatureMap, ProjectionMap, SegMask
from .weak_labels import (
    WeakLabelMatrix,
    cosine_similarity_matrix,
    hoshen_kopelman,
    mutual_nn_graph,
)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str


def _random_fmap(rng, c_max=6, hw_max=64):
    c = int(rng.integers(1, c_max + 1))
    hw = int(rng.integers(2, hw_max + 1))
    return FeatureMap.from_array(rng.standard_normal((c, 1, hw)) * rng.uniform(0.2, 5.0))


def check_formats() -> SuiteResult:
    rng = np.random.Generator(np.random.PCG64(101))
    for _ in range(50):
        c, h, w = (int(rng.integers(1, 7)) for _ in range(3))
        fm = FeatureMap.from_array(rng.standard_normal((c, h, w)).astype(np.float32))
        blob = fmap_to_bytes(fm)
        if fmap_to_bytes(fmap_from_bytes(blob)) != blob:
            return SuiteResult("formats", False, "feature map round-trip not byte-exact")
        mask = SegMask.from_array(rng.integers(0, 2, size=(h, w)))
        if not np.array_equal(mask_from_bytes(mask_to_bytes(mask)).bits, mask.bits):
            return SuiteResult("formats", False, "mask round-trip changed bits")
    for corrupted in (b"XXXX" + bytes(16), b"FMP", b"FMP1" + bytes(11)):
        try:
            fmap_from_bytes(corrupted)
            return SuiteResult("formats", False, "corrupted header accepted")
        except Exception:
            pass
    return SuiteResult("formats", True, "100 round-trips byte-exact, corrupt headers rejected")


def check_pca_oracle() -> SuiteResult:
    rng = np.random.Generator(np.random.PCG64(102))
    for _ in range(200):
        fm = _random_fmap(rng)
        cov = pca.covariance(fm)
        res = pca.top_eigen(cov, k=1)
        ref_vals, ref_vecs = np.linalg.eigh(cov.entries)
        lam = ref_vals[-1]
        if abs(res.eigenvalues[0] - lam) > 1e-8 * max(1.0, abs(lam)):
            return SuiteResult("pca-oracle", False, f"eigenvalue off by {abs(res.eigenvalues[0]-lam):.2e}")
        gap = lam - (ref_vals[-2] if cov.dim > 1 else -np.inf)
        if gap > 1e-6 * max(1.0, lam):
            if abs(np.dot(res.eigenvectors[0], ref_vecs[:, -1])) < 1.0 - 1e-8:
                return SuiteResult("pca-oracle", False, "eigenvector misaligned with dense reference")
        m = pca.project(fm, pca.mean_vector(fm), res.eigenvectors[0])
        std = float(m.values.std())
        if abs(float(m.values.mean())) > 1e-6 * max(1e-12, std):
            return SuiteResult("pca-oracle", False, "projection map mean is not zero")
        if abs(float(m.values.var()) - res.eigenvalues[0]) > 1e-6 * max(1e-12, res.eigenvalues[0]):
            return SuiteResult("pca-oracle", False, "projection variance differs from eigenvalue")
    return SuiteResult("pca-oracle", True, "200 maps match the dense reference")


def _dfs_components(n: int, edges) -> list[int]:
    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    labels = [-1] * n
    nxt = 0
    for start in range(n):
        if labels[start] != -1:
            continue
        stack = [start]
        labels[start] = nxt
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if labels[u] == -1:
                    labels[u] = nxt
                    stack.append(u)
        nxt += 1
    return labels


def check_weak_labels() -> SuiteResult:
    rng = np.random.Generator(np.random.PCG64(103))
    for _ in range(1000):
        n = int(rng.integers(2, 65))
        batch = EmbeddingBatch.from_array(rng.standard_normal((n, int(rng.integers(2, 17)))))
        graph = mutual_nn_graph(cosine_similarity_matrix(batch))
        if hoshen_kopelman(graph).labels.tolist() != _dfs_components(n, graph.edges):
            return SuiteResult("weak-labels", False, "components differ from DFS oracle")
    angles = np.deg2rad([0, 5, 180, 185])
    batch = EmbeddingBatch.from_array(np.stack([np.cos(angles), np.sin(angles)], axis=1))
    graph = mutual_nn_graph(cosine_similarity_matrix(batch))
    if graph.edges != frozenset({(0, 1), (2, 3)}):
        return SuiteResult("weak-labels", False, f"4-angle case produced {sorted(graph.edges)}")
    return SuiteResult("weak-labels", True, "1000 batches match the DFS oracle")


def _grad_err(analytic: np.ndarray, fn: Callable[[np.ndarray], float], point: np.ndarray) -> float:
    num = numeric_gradient(fn, point.ravel(), 1e-4).reshape(point.shape)
    return float(np.linalg.norm(analytic - num) / max(np.linalg.norm(num), 1e-12))


def check_gradients(trials: int = 10) -> SuiteResult:
    rng = np.random.Generator(np.random.PCG64(104))
    worst = 0.0
    for _ in range(trials):
        n, d = int(rng.integers(2, 9)), int(rng.integers(2, 17))
        cfg = LossConfig(tau=float(rng.uniform(0.1, 1.0)))
        a = rng.standard_normal((n, d))
        b = rng.standard_normal((n, d))
        lv = info_nce(EmbeddingBatch.from_array(a), EmbeddingBatch.from_array(b), cfg)
        worst = max(worst, _grad_err(
            lv.gradients["views_a"],
            lambda x: info_nce(
                EmbeddingBatch.from_array(x.reshape(n, d)), EmbeddingBatch.from_array(b), cfg
            ).value,
            a,
        ))
        y = np.zeros((n, n), dtype=np.uint8)
        iu = np.triu_indices(n, 1)
        y[iu] = rng.integers(0, 2, size=len(iu[0]))
        y = y + y.T
        ym = WeakLabelMatrix(n, y)
        lv = sup_contrastive(EmbeddingBatch.from_array(a), ym, cfg)
        worst = max(worst, _grad_err(
            lv.gradients["v"],
            lambda x: sup_contrastive(EmbeddingBatch.from_array(x.reshape(n, d)), ym, cfg).value,
            a,
        ))
        lv = graph_loss(
            EmbeddingBatch.from_array(a), EmbeddingBatch.from_array(b), ym, ym, cfg
        )
        worst = max(worst, _grad_err(
            lv.gradients["v1"],
            lambda x: graph_loss(
                EmbeddingBatch.from_array(x.reshape(n, d)), EmbeddingBatch.from_array(b),
                ym, ym, cfg,
            ).value,
            a,
        ))
        c, hh, ww = int(rng.integers(2, 9)), int(rng.integers(1, 7)), int(rng.integers(1, 7))
        u = rng.standard_normal((c, hh, ww))
        v = rng.standard_normal((c, hh, ww))
        lv = align_loss(FeatureMap.from_array(u), FeatureMap.from_array(v))
        worst = max(worst, _grad_err(
            lv.gradients["s_i"],
            lambda x: align_loss(
                FeatureMap.from_array(x.reshape(c, hh, ww)), FeatureMap.from_array(v)
            ).value,
            u,
        ))
        if worst >= 1e-3:
            return SuiteResult("gradients", False, f"relative error {worst:.2e} >= 1e-3")
    return SuiteResult("gradients", True, f"worst relative error {worst:.2e}")


def check_boxes() -> SuiteResult:
    def blob(h, w, spans):
        bits = np.zeros((h, w), dtype=np.uint8)
        for y0, x0, y1, x1 in spans:
            bits[y0:y1 + 1, x0:x1 + 1] = 1
        return SegMask.from_array(bits)

    single = boxes_mod.generate_boxes(blob(100, 100, [(40, 30, 59, 49)]))
    if single != [BoundingBox(30, 40, 49, 59)]:
        return SuiteResult("boxes", False, f"single blob gave {single}")
    double = boxes_mod.generate_boxes(blob(100, 100, [(10, 10, 29, 29), (70, 60, 89, 79)]))
    if len(double) != 3:
        return SuiteResult("boxes", False, f"two blobs gave {len(double)} boxes")
    tiny = boxes_mod.generate_boxes(blob(100, 100, [(50, 50, 52, 52)]))
    if tiny != [BoundingBox(50, 50, 52, 52)]:
        return SuiteResult("boxes", False, f"sub-threshold blob gave {tiny}")

    rng = np.random.Generator(np.random.PCG64(105))
    for _ in range(200):
        h, w = int(rng.integers(1, 33)), int(rng.integers(1, 33))
        bits = (rng.random((h, w)) < rng.uniform(0.2, 0.8)).astype(np.uint8)
        comp = boxes_mod.connected_components_8(SegMask.from_array(bits))
        oracle = _flood_fill(bits)
        fg = bits > 0
        pairs = set(zip(comp.labels[fg].tolist(), oracle[fg].tolist()))
        if len(pairs) != len({p[0] for p in pairs}) or len(pairs) != len({p[1] for p in pairs}):
            return SuiteResult("boxes", False, "component partition differs from flood fill")
    return SuiteResult("boxes", True, "constructed cases exact, 200 masks match flood fill")


def _flood_fill(bits: np.ndarray) -> np.ndarray:
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=np.int64)
    nxt = 0
    for sr in range(h):
        for sc in range(w):
            if not bits[sr, sc] or labels[sr, sc]:
                continue
            nxt += 1
            stack = [(sr, sc)]
            labels[sr, sc] = nxt
            while stack:
                r, c = stack.pop()
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr, cc = r + dr, c + dc
                        if 0 <= rr < h and 0 <= cc < w and bits[rr, cc] and not labels[rr, cc]:
                            labels[rr, cc] = nxt
                            stack.append((rr, cc))
    return labels


def check_metrics() -> SuiteResult:
    gt = SegMask.from_array(np.array([[1, 1, 0, 0]], dtype=np.uint8))
    heat = ProjectionMap.from_array(np.array([[0.9, 0.4, 0.6, 0.1]]))
    got = f_beta_max(heat, gt, beta_sq=0.3)
    if abs(got - 0.8125) > 1e-12:
        return SuiteResult("metrics", False, f"4-pixel F-measure case gave {got}")
    a = BoundingBox(0, 0, 9, 9)
    if abs(boxes_mod.box_iou(a, BoundingBox(5, 5, 14, 14)) - 25 / 175) > 1e-12:
        return SuiteResult("metrics", False, "offset box IoU differs from 25/175")
    perfect = SegMask.from_array(np.array([[1, 0], [0, 1]], dtype=np.uint8))
    iou, acc = mask_iou_accuracy(perfect, perfect)
    if (iou, acc) != (1.0, 1.0):
        return SuiteResult("metrics", False, "perfect prediction not scored 1.0")
    rng = np.random.Generator(np.random.PCG64(106))
    for _ in range(100):
        h, w = int(rng.integers(2, 12)), int(rng.integers(2, 12))
        vals = rng.integers(0, 8, size=(h, w)) / 7.0
        gt = SegMask.from_array((rng.random((h, w)) < 0.4).astype(np.uint8))
        if gt.foreground_count() == 0:
            continue
        base = f_beta_max(ProjectionMap.from_array(vals), gt)
        resc = f_beta_max(ProjectionMap.from_array(np.sqrt(vals)), gt)
        if abs(base - resc) > 1e-12:
            return SuiteResult("metrics", False, "F-measure not invariant to monotone rescale")
    return SuiteResult("metrics", True, "worked cases exact, rescale invariance holds")


def check_video() -> SuiteResult:
    rng = np.random.Generator(np.random.PCG64(107))
    c, h, w = 4, 5, 6
    frame = FeatureMap.from_array(rng.standard_normal((c, h, w)))
    flow = FeatureMap.from_array(rng.standard_normal((c, h, w)))
    cfg = pca.DiscoveryConfig(video_lambda1=1.0, video_lambda2=0.0)
    single = pca.video_discover([frame], [flow], cfg)[0]
    if not np.array_equal(single.bits, pca.discover(frame, cfg).mask.bits):
        return SuiteResult("video", False, "lambda2=0 does not reduce to the image pipeline")

    rgb = [FeatureMap.from_array(rng.standard_normal((c, h, w))) for _ in range(3)]
    flows = [FeatureMap.from_array(rng.standard_normal((c, h, w))) for _ in range(3)]
    cfg = pca.DiscoveryConfig()
    got = pca.video_discover(rgb, flows, cfg)
    # brute force: concatenated pixel matrix, dense eigensolver
    rx = np.concatenate([f.data.reshape(c, -1) for f in rgb], axis=1)
    fx = np.concatenate([f.data.reshape(c, -1) for f in flows], axis=1)
    fused = cfg.video_lambda1 * np.cov(rx, bias=True) + cfg.video_lambda2 * np.cov(fx, bias=True)
    vec = np.linalg.eigh(fused)[1][:, -1]
    mean = rx.mean(axis=1)
    for mask, f in zip(got, rgb):
        m = (vec @ (f.data.reshape(c, -1) - mean[:, None])).reshape(h, w)
        border = np.zeros((h, w), dtype=bool)
        border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
        if m[border].mean() > 0:
            m = -m
        lo, hi = m.min(), m.max()
        want = ((m - lo) / (hi - lo) >= cfg.threshold).astype(np.uint8)
        if not np.array_equal(mask.bits, want):
            return SuiteResult("video", False, "3-frame masks differ from brute force")
    return SuiteResult("video", True, "reduction and 3-frame brute force agree")


ALL_SUITES: list[Callable[[], SuiteResult]] = [
    check_formats,
    check_pca_oracle,
    check_weak_labels,
    check_gradients,
    check_boxes,
    check_metrics,
    check_video,
]


def run_all() -> list[SuiteResult]:
    return [suite() for suite in ALL_SUITES]
