"""Siamese fine-tuning loop: regress (1 - cos)/2 to human fidelity scores."""

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from scipy.stats import spearmanr

from .data import DataError, build_examples, read_manifest, read_scores
from .loss import predicted_change
from .model import build_backbone

__all__ = ["TrainConfig", "TrainResult", "train"]


@dataclass
class TrainConfig:
    backbone_id: str = "tiny"
    learning_rate: float = 1e-5
    epochs: int = 10
    batch_size: int = 8
    train_manifest: str = "manifest.jsonl"
    score_file: str = "scores.jsonl"
    export_path: str | None = None
    seed: int = 0
    embedding_dim: int = 16
    input_size: tuple = (16, 16)
    normalization: dict = field(default_factory=lambda: {
        "mean": [0.5, 0.5, 0.5], "std": [0.5, 0.5, 0.5]})
    images_root: str = "."
    log_path: str | None = None
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class TrainResult:
    log: list  # per-epoch {"epoch", "train_loss", "test_srcc"}
    model: torch.nn.Module  # final-epoch weights
    best_state: dict  # weights of the best test-SRCC epoch
    best_epoch: int
    best_srcc: float | None
    spec_path: Path | None  # sidecar written when export_path is set


def _stack(examples, indices):
    gt = torch.stack([examples[i].gt for i in indices])
    sr = torch.stack([examples[i].sr for i in indices])
    target = torch.tensor([examples[i].target for i in indices],
                          dtype=torch.float32)
    return gt, sr, target


def _eval_srcc(model, examples, batch_size: int):
    if len(examples) < 3:
        return None
    preds = []
    with torch.no_grad():
        for start in range(0, len(examples), batch_size):
            idx = range(start, min(start + batch_size, len(examples)))
            gt, sr, _ = _stack(examples, idx)
            preds.extend(predicted_change(model, gt, sr).tolist())
    targets = [e.target for e in examples]
    rho = spearmanr(preds, targets).statistic
    if rho is None or math.isnan(rho):
        return None  # constant predictions or targets
    return float(rho)


def train(config: TrainConfig) -> TrainResult:
    """Run the fine-tuning loop; deterministic for a fixed config.

    Each step embeds the GT and SR image through the shared backbone and
    minimizes the squared error between (1 - cos)/2 and the human score.
    Only split=train pairs optimize; split=test pairs are scored by SRCC
    after every epoch, and the best-by-test-SRCC weights are kept.
    """
    pairs = read_manifest(config.train_manifest)
    scores = read_scores(config.score_file)
    mean = config.normalization["mean"]
    std = config.normalization["std"]
    train_ex = build_examples(pairs, scores, config.images_root,
                              config.input_size, mean, std, split="train")
    if not train_ex:
        raise DataError("train split is empty; nothing to optimize")
    test_ex = build_examples(pairs, scores, config.images_root,
                             config.input_size, mean, std, split="test")

    torch.manual_seed(config.seed)
    model = build_backbone(config.backbone_id, config.embedding_dim, config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    shuffler = np.random.default_rng(config.seed)

    log = []
    best_state = copy.deepcopy(model.state_dict())
    best_epoch = 0
    best_srcc = None
    for epoch in range(1, config.epochs + 1):
        model.train()
        order = shuffler.permutation(len(train_ex))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            gt, sr, target = _stack(train_ex, batch)
            pred = predicted_change(model, gt, sr)
            loss = torch.mean((pred - target) ** 2)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}: "
                    f"{loss.item()!r} (lr={config.learning_rate}, "
                    f"batch pairs {[train_ex[i].pair_id for i in batch]})"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss.item() * len(batch)
        train_loss = total / len(train_ex)

        model.eval()
        test_srcc = _eval_srcc(model, test_ex, config.batch_size)
        log.append({"epoch": epoch, "train_loss": train_loss,
                    "test_srcc": test_srcc})
        if test_srcc is not None and (best_srcc is None or test_srcc > best_srcc):
            best_srcc = test_srcc
            best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())

    if best_srcc is None:
        # no usable test split: the final weights are the checkpoint
        best_state = copy.deepcopy(model.state_dict())
        best_epoch = config.epochs

    if config.log_path:
        lines = "".join(json.dumps(entry) + "\n" for entry in log)
        Path(config.log_path).write_text(lines, encoding="utf-8")
    if config.checkpoint_path:
        torch.save({
            "backbone_id": config.backbone_id,
            "embedding_dim": config.embedding_dim,
            "input_size": tuple(config.input_size),
            "normalization": {"mean": list(mean), "std": list(std)},
            "state_dict": best_state,
            "best_epoch": best_epoch,
            "best_srcc": best_srcc,
        }, config.checkpoint_path)

    spec_path = None
    if config.export_path:
        from .export import export_model

        best_model = build_backbone(config.backbone_id, config.embedding_dim,
                                    config.seed)
        best_model.load_state_dict(best_state)
        spec_path = export_model(best_model, config.export_path,
                                 config.input_size, config.embedding_dim,
                                 {"mean": list(mean), "std": list(std)})

    return TrainResult(log=log, model=model, best_state=best_state,
                       best_epoch=best_epoch, best_srcc=best_srcc,
                       spec_path=spec_path)
