"""Backbone registry.

Every backbone maps a normalized (N, 3, H, W) batch to (N, D) embeddings
and is built from the layer set the exporter understands: Conv2d, ReLU,
AdaptiveAvgPool2d(1), Flatten and Linear. Pretrained encoders would be
registered the same way, loading weights from a local path; none ship
here because the environment has no model hosting access.
"""

import torch
from torch import nn

__all__ = ["BACKBONES", "build_backbone"]


def _tiny(embedding_dim: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(3, 8, kernel_size=3, padding=1),
        nn.ReLU(),
        nn.Conv2d(8, 16, kernel_size=3, stride=2, padding=1),
        nn.ReLU(),
        nn.AdaptiveAvgPool2d(1),
        nn.Flatten(),
        nn.Linear(16, embedding_dim),
    )


def _tiny_deep(embedding_dim: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(3, 8, kernel_size=3, padding=1),
        nn.ReLU(),
        nn.Conv2d(8, 16, kernel_size=3, stride=2, padding=1),
        nn.ReLU(),
        nn.Conv2d(16, 32, kernel_size=3, stride=2, padding=1),
        nn.ReLU(),
        nn.AdaptiveAvgPool2d(1),
        nn.Flatten(),
        nn.Linear(32, embedding_dim),
    )


BACKBONES = {
    "tiny": _tiny,
    "tiny_deep": _tiny_deep,
}


def build_backbone(backbone_id: str, embedding_dim: int, seed: int) -> nn.Sequential:
    """Construct a backbone with seeded initialization."""
    if backbone_id not in BACKBONES:
        raise ValueError(
            f"unknown backbone {backbone_id!r}; available: {sorted(BACKBONES)}"
        )
    if embedding_dim < 1:
        raise ValueError(f"embedding_dim must be >= 1, got {embedding_dim}")
    generator_state = torch.get_rng_state()
    try:
        torch.manual_seed(seed)
        model = BACKBONES[backbone_id](embedding_dim)
    finally:
        torch.set_rng_state(generator_state)
    return model
