"""Fine-tuning and export of embedding backbones for fidelity scoring.

- data: manifest/score JSON-lines readers and the image tensor pipeline
- model: backbone registry (seeded construction)
- loss: change-score prediction and Eq-style composite loss
- train: siamese regression loop with per-epoch test SRCC
- export: interchange graph writer with a structural parity self-check
"""

from .data import DataError, build_examples, read_manifest, read_scores
from .export import ExportError, export_checkpoint, export_model, numpy_forward
from .loss import composite_loss, predicted_change
from .model import BACKBONES, build_backbone
from .train import TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "ExportError",
    "BACKBONES",
    "TrainConfig",
    "TrainResult",
    "build_backbone",
    "build_examples",
    "composite_loss",
    "export_checkpoint",
    "export_model",
    "numpy_forward",
    "predicted_change",
    "read_manifest",
    "read_scores",
    "train",
]
