"""Weak-label assignment over batch embeddings.

Builds the mutual nearest-neighbour similarity graph, labels its connected
components with union-find, and expands the labels into the binary pairwise
matrix that supervises the weak-label contrastive loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateEmbeddingError
from .types import EmbeddingBatch


@dataclass(frozen=True)
class SimilarityGraph:
    """Undirected graph over batch indices; no self loops."""

    n: int
    edges: frozenset[tuple[int, int]]  # pairs stored as (min, max)

    def __post_init__(self):
        if self.n < 1:
            raise DataError(f"graph must have at least one vertex, got n={self.n}")
        for i, j in self.edges:
            if i == j:
                raise DataError(f"self loop on vertex {i}")
            if not (0 <= i < j < self.n):
                raise DataError(f"edge ({i},{j}) out of range for n={self.n}")


@dataclass(frozen=True)
class ComponentLabels:
    """Dense 0-based component ids, assigned in order of first vertex occurrence."""

    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.labels, dtype=np.int64)
        if arr.ndim != 1 or arr.size < 1:
            raise DataError("labels must be a non-empty 1-D array")
        seen: set[int] = set()
        expected = 0
        for value in arr:
            v = int(value)
            if v == expected and v not in seen:
                seen.add(v)
                expected += 1
            elif v not in seen:
                raise DataError("component ids must be dense and first-occurrence ordered")
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)

    @property
    def n(self) -> int:
        return int(self.labels.size)


@dataclass(frozen=True)
class WeakLabelMatrix:
    """Symmetric binary similarity matrix with zero diagonal."""

    n: int
    y: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.y, dtype=np.uint8)
        if arr.shape != (self.n, self.n):
            raise DataError(f"label matrix must be {self.n}x{self.n}, got {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise DataError("label matrix entries must be 0 or 1")
        if (arr != arr.T).any():
            raise DataError("label matrix must be symmetric")
        if np.diag(arr).any():
            raise DataError("label matrix diagonal must be zero")
        arr.flags.writeable = False
        object.__setattr__(self, "y", arr)


def cosine_similarity_matrix(batch: EmbeddingBatch) -> np.ndarray:
    """Pairwise cosine similarities; unit diagonal by construction."""
    norms = np.linalg.norm(batch.rows, axis=1)
    weak = np.flatnonzero(norms <= 1e-12)
    if weak.size:
        raise DegenerateEmbeddingError(int(weak[0]))
    unit = batch.rows / norms[:, None]
    sim = unit @ unit.T
    sim = (sim + sim.T) / 2.0
    np.fill_diagonal(sim, 1.0)
    return sim


def mutual_nn_graph(sim: np.ndarray) -> SimilarityGraph:
    """Edges between mutual nearest neighbours.

    Vertex i's nearest neighbour is argmax over k != i of sim[i, k], ties
    broken towards the smallest index; the edge {i, j} exists only when the
    relation holds both ways.
    """
    sim = np.asarray(sim, dtype=np.float64)
    n = sim.shape[0]
    if sim.ndim != 2 or sim.shape != (n, n) or n < 2:
        raise DataError(f"similarity matrix must be square with n >= 2, got {sim.shape}")
    masked = sim.copy()
    np.fill_diagonal(masked, -np.inf)
    nearest = np.argmax(masked, axis=1)  # argmax picks the smallest index on ties
    edges = set()
    for i in range(n):
        j = int(nearest[i])
        if int(nearest[j]) == i:
            edges.add((min(i, j), max(i, j)))
    return SimilarityGraph(n, frozenset(edges))


class _UnionFind:
    """Union-find with path compression (union by size)."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def hoshen_kopelman(graph: SimilarityGraph) -> ComponentLabels:
    """Connected components via union-find, relabeled to dense first-occurrence ids."""
    uf = _UnionFind(graph.n)
    for i, j in sorted(graph.edges):
        uf.union(i, j)
    remap: dict[int, int] = {}
    labels = np.empty(graph.n, dtype=np.int64)
    for v in range(graph.n):
        root = uf.find(v)
        if root not in remap:
            remap[root] = len(remap)
        labels[v] = remap[root]
    return ComponentLabels(labels)


def weak_label_matrix(components: ComponentLabels) -> WeakLabelMatrix:
    """y[i, j] = 1 iff i != j and both vertices share a component."""
    labels = components.labels
    y = (labels[:, None] == labels[None, :]).astype(np.uint8)
    np.fill_diagonal(y, 0)
    return WeakLabelMatrix(components.n, y)


def weak_labels_from_batch(batch: EmbeddingBatch) -> WeakLabelMatrix:
    """Convenience composition: similarities -> mutual-NN graph -> components -> y."""
    return weak_label_matrix(hoshen_kopelman(mutual_nn_graph(cosine_similarity_matrix(batch))))
