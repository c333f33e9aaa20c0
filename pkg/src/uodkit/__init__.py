"""Feature-space unsupervised object discovery toolkit."""

from .errors import (
    ConvergenceError,
    DataError,
    DegenerateEmbeddingError,
    FormatError,
    HarnessError,
    UodError,
)
from .types import BoundingBox, EmbeddingBatch, FeatureMap, ProjectionMap, SegMask

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "ConvergenceError",
    "DataError",
    "DegenerateEmbeddingError",
    "EmbeddingBatch",
    "FeatureMap",
    "FormatError",
    "HarnessError",
    "ProjectionMap",
    "SegMask",
    "UodError",
    "__version__",
]
