"""simsearch: similar-item retrieval over binarized embedding fingerprints."""

from .codec import (
    BinaryCode,
    CodecConfig,
    EmbeddingVector,
    ProjectionPlan,
    binarize,
    build_projection_plan,
    cosine,
    hamming,
    split_subcodes,
)

__all__ = [
    "BinaryCode",
    "CodecConfig",
    "EmbeddingVector",
    "ProjectionPlan",
    "binarize",
    "build_projection_plan",
    "cosine",
    "hamming",
    "split_subcodes",
]

__version__ = "0.1.0"
