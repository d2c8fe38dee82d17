"""Embedding-based high-level-fidelity scoring over interchange model files."""

from .model import GraphDef, ModelDef, NodeDef, TensorDef, load_model
from .runtime import GraphRunner, SUPPORTED_OPS
from .scoring import (
    Embedding,
    EmbeddingBackend,
    EmbeddingModelSpec,
    HlfScore,
    batch_score,
    change_score_from_cosine,
    cosine_similarity,
    embed,
    hlf_score,
    load_backend,
    load_spec,
    regressed_change_score,
)

__all__ = [
    "ModelDef",
    "GraphDef",
    "NodeDef",
    "TensorDef",
    "load_model",
    "GraphRunner",
    "SUPPORTED_OPS",
    "EmbeddingModelSpec",
    "EmbeddingBackend",
    "Embedding",
    "HlfScore",
    "load_spec",
    "load_backend",
    "embed",
    "cosine_similarity",
    "change_score_from_cosine",
    "regressed_change_score",
    "hlf_score",
    "batch_score",
]
